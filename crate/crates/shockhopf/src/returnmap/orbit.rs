use super::flow::solve_period_run;
use super::{FlowOptions, ModelFamily, PerturbationModel, PeriodSolve, PoincareSystem, TruncationOrder};
use crate::bifurcation::{solve_branch, BranchOptions, BranchPoint, OmegaRule};
use crate::error::{Error, Result};
use crate::spaces::GridFunction;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitOptions {
    pub branch: BranchOptions,
    /// Keep the state every this many steps.
    pub snapshot_every: usize,
    /// Largest shift, in nodes, scanned by the drift cross-correlation.
    pub drift_window: usize,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self { branch: BranchOptions::default(), snapshot_every: 16, drift_window: 40 }
    }
}

/// A periodic solution `ū + u(t)` of the untruncated perturbation equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub a: f64,
    pub eps: f64,
    /// `T*(a)`.
    pub period: f64,
    pub times: Vec<f64>,
    /// `u(t)` at `times`, first `u(0)`, last `u(T*)`.
    pub snapshots: Vec<GridFunction>,
    /// `sup_x (1+|x₁|)|u(x,t)|` per snapshot.
    pub amplitude: Vec<f64>,
    /// `‖u(T*) − u(0)‖_{B1}/‖u(0)‖_{B1}`.
    pub periodicity_residual: f64,
    /// `max_t ‖v‖_{X1}/|w|^p`, to compare with `C₀/2`.
    pub clamp_ratio: f64,
    pub truncation: f64,
    pub order: TruncationOrder,
    /// `‖b‖_{X1}/a²`.
    pub transverse_constant: f64,
    /// Shift maximizing the cross-correlation of `u(0)` and `u(T*)`.
    pub drift: f64,
    /// Largest change of any component's integral of `u(t)` over the period.
    pub mass_drift: f64,
    /// `max_t ‖Π̃u(t)‖_{B1}/‖u(t)‖_{B1}`.
    pub projection_defect: f64,
    pub point: BranchPoint,
    pub period_solve: Option<PeriodSolve>,
}

impl PeriodicOrbit {
    /// `max/min` of the amplitude ledger over the period.
    pub fn amplitude_spread(&self) -> f64 {
        let max = self.amplitude.iter().copied().fold(0.0, f64::max);
        let min = self.amplitude.iter().copied().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            1.0
        } else {
            max / min
        }
    }

    /// `max_t sup_x(1+|x|)|u|/a`.
    pub fn amplitude_ratio(&self) -> f64 {
        if self.a == 0.0 {
            return 0.0;
        }
        self.amplitude.iter().copied().fold(0.0, f64::max) / self.a.abs()
    }
}

/// Solves the branch equation at `a` on `system`, reruns the flow over one
/// period and checks that the truncation never acted, so the orbit solves
/// the untruncated equation.
pub fn find_periodic_orbit<F: ModelFamily>(system: &PoincareSystem<F>, a: f64, opts: &OrbitOptions) -> Result<PeriodicOrbit> {
    let sys0 = system.system(0.0)?;
    let zero = sys0.zero();
    let (grid, n) = (zero.grid, zero.n_comp);
    if a == 0.0 {
        let t = sys0.linear_period();
        return Ok(PeriodicOrbit {
            a,
            eps: 0.0,
            period: t,
            times: vec![0.0, t],
            snapshots: vec![zero.clone(), zero.clone()],
            amplitude: vec![0.0, 0.0],
            periodicity_residual: 0.0,
            clamp_ratio: 0.0,
            truncation: system.flow.truncation,
            order: system.flow.order,
            transverse_constant: 0.0,
            drift: 0.0,
            mass_drift: 0.0,
            projection_defect: 0.0,
            point: BranchPoint {
                a,
                eps: 0.0,
                period: t,
                f_residual: 0.0,
                g_residual: 0.0,
                b: zero,
                b_weak: 0.0,
                b_strong: 0.0,
                reduce_iterations: 0,
                ift_iterations: 0,
                bound_constant: None,
            },
            period_solve: None,
        });
    }

    let curve = solve_branch(system, &[a], &OmegaRule::Zero, &opts.branch)?;
    let point = curve.points.into_iter().next().expect("one sample in, one point out");
    let sys = system.system(point.eps)?;
    let flow_opts = FlowOptions { snapshot_every: opts.snapshot_every.max(1), ..system.flow.clone() };
    let (period_solve, flow) = solve_period_run(sys.as_ref(), a, &point.b, &flow_opts)?;

    let clamp_ratio = flow.clamp_ratio();
    if flow.truncated_steps > 0 || !(clamp_ratio < 0.5 * system.flow.truncation) {
        return Err(Error::TruncationActive(format!(
            "max ‖v‖/|w|^p = {clamp_ratio:.4} against C₀/2 = {} ({} clamped steps) at a = {a}",
            0.5 * system.flow.truncation,
            flow.truncated_steps
        )));
    }

    let k = system.flow.steps;
    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    for (step, v) in &flow.snapshots {
        times.push(flow.times[*step]);
        snapshots.push(GridFunction::new(grid, n, sys.compose(flow.w[*step], &v.values))?);
    }
    if flow.snapshots.last().map(|(s, _)| *s) != Some(k) {
        times.push(flow.times[k]);
        snapshots.push(GridFunction::new(grid, n, sys.compose(flow.w_final(), &flow.v_final.values))?);
    }

    let first = &snapshots[0];
    let last = snapshots.last().expect("at least two snapshots");
    let mut diff = last.clone();
    diff.axpy(-1.0, first)?;
    let weak = |u: &GridFunction| system.family.weak_norm(u);
    let periodicity_residual = weak(&diff)? / weak(first)?;

    let amplitude = snapshots.iter().map(|u| system.family.strong_norm(u)).collect::<Result<Vec<_>>>()?;
    let m0 = sys.mass(&first.values);
    let mass_drift = snapshots
        .iter()
        .flat_map(|u| sys.mass(&u.values).into_iter().zip(m0.clone()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    let projection_defect = snapshots
        .iter()
        .map(|u| {
            let v = GridFunction::new(grid, n, sys.pi_tilde(&u.values))?;
            Ok(weak(&v)? / weak(u)?)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    Ok(PeriodicOrbit {
        a,
        eps: point.eps,
        period: period_solve.period,
        drift: correlation_shift(first, last, opts.drift_window) as f64 * grid.h(),
        transverse_constant: point.b_strong / (a * a),
        times,
        snapshots,
        amplitude,
        periodicity_residual,
        clamp_ratio,
        truncation: system.flow.truncation,
        order: system.flow.order,
        mass_drift,
        projection_defect,
        point,
        period_solve: Some(period_solve),
    })
}

/// The node shift `s` in `[−window, window]` maximizing `Σ_i f_i·g_{i+s}`.
pub fn correlation_shift(f: &GridFunction, g: &GridFunction, window: usize) -> isize {
    let n = f.n_comp;
    let m = f.grid.len() as isize;
    let w = window as isize;
    let score = |s: isize| -> f64 {
        (0..m)
            .filter(|i| (0..m).contains(&(i + s)))
            .map(|i| (0..n).map(|c| f.at(i as usize, c) * g.at((i + s) as usize, c)).sum::<f64>())
            .sum()
    };
    let mut best = (0, score(0));
    for s in -w..=w {
        let v = score(s);
        if v > best.1 {
            best = (s, v);
        }
    }
    best.0
}
