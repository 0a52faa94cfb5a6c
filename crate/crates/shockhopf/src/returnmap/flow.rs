use super::{FlowOptions, LinearStepper, PerturbationModel, TruncationOrder};
use crate::error::{Error, Result};
use crate::numerics::ode::hermite;
use crate::numerics::roots::brent;
use crate::spaces::GridFunction;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Trajectory of the truncated system
/// `ẇ = λw + ⟨φ̃₊, DQ(2ℜ(wφ₊) + v̂)⟩`, `v̇ = Lv + Π̃DQ(2ℜ(wφ₊) + v)`,
/// with `v̂(x) = ψ(C₀|w|^p/|v(x)|)v(x)`. Per-step records are taken at the
/// start of every step and at the end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedFlow {
    pub eps: f64,
    pub a: f64,
    pub dt: f64,
    pub truncation: f64,
    pub order: TruncationOrder,
    pub times: Vec<f64>,
    pub w: Vec<Complex64>,
    /// `r = |w|` and the unwrapped `θ` with `θ(0) = 0` relative to `arg w(0)`.
    pub radius: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    /// `‖v(t)‖_{X1}`.
    pub v_strong: Vec<f64>,
    /// Steps on which the clamp changed `v`.
    pub truncated_steps: usize,
    /// `(step, v)` every `snapshot_every` steps.
    pub snapshots: Vec<(usize, GridFunction)>,
    pub v_final: GridFunction,
}

impl TruncatedFlow {
    pub fn w_final(&self) -> Complex64 {
        *self.w.last().expect("a trajectory has at least its initial record")
    }

    /// `max_t ‖v(t)‖_{X1}/|w(t)|^p` with `p` the truncation order.
    pub fn clamp_ratio(&self) -> f64 {
        self.radius
            .iter()
            .zip(&self.v_strong)
            .map(|(r, v)| if *v == 0.0 { 0.0 } else { v / self.order.scale(*r) })
            .fold(0.0, f64::max)
    }
}

fn phi_functions(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 0.1 {
        // φ₁ = Σ zᵏ/(k+1)!, φ₂ = Σ zᵏ/(k+2)!
        let (mut p1, mut p2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut term = Complex64::new(1.0, 0.0);
        let mut fact = 1.0;
        for k in 0..14 {
            p1 += term / (fact * (k + 1) as f64);
            p2 += term / (fact * ((k + 1) * (k + 2)) as f64);
            term *= z;
            fact *= (k + 1) as f64;
        }
        (p1, p2)
    } else {
        let e = z.exp();
        ((e - 1.0) / z, (e - 1.0 - z) / (z * z))
    }
}

struct Stepper<'a, M: PerturbationModel + ?Sized> {
    sys: &'a M,
    opts: &'a FlowOptions,
    linear: Box<dyn LinearStepper + 'a>,
    dt: f64,
    growth: Complex64,
    phi1: Complex64,
    phi2: Complex64,
    reference: f64,
}

struct Forcing {
    w: Complex64,
    v: Vec<f64>,
    clamped: bool,
}

pub(super) struct Run {
    pub flow: TruncatedFlow,
    /// `(w, v, θ)` after exactly `steps_per_period` steps, when reached.
    pub at_period: Option<(Complex64, Vec<f64>, f64)>,
}

impl<'a, M: PerturbationModel + ?Sized> Stepper<'a, M> {
    fn new(sys: &'a M, opts: &'a FlowOptions, dt: f64, reference: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Argument(format!("time step {dt} must be positive")));
        }
        let linear = sys.linear_stepper(dt)?;
        let z = sys.eigenvalue() * dt;
        let (phi1, phi2) = phi_functions(z);
        Ok(Self { sys, opts, linear, dt, growth: z.exp(), phi1, phi2, reference })
    }

    fn forcing(&self, w: Complex64, v: &[f64]) -> Forcing {
        if !self.opts.nonlinear {
            return Forcing { w: Complex64::new(0.0, 0.0), v: vec![0.0; v.len()], clamped: false };
        }
        let sys = self.sys;
        let full = sys.nonlinearity(&sys.compose(w, v));
        let gv = sys.pi_tilde(&full);
        let bound = self.opts.truncation * self.opts.order.scale(w.norm());
        match sys.clamp(v, bound) {
            Some(vhat) => Forcing { w: sys.coefficient(&sys.nonlinearity(&sys.compose(w, &vhat))), v: gv, clamped: true },
            None => Forcing { w: sys.coefficient(&full), v: gv, clamped: false },
        }
    }

    /// Runs from `(w0, v0)` until `stop(step, θ)` or `max_steps`.
    fn run(&self, a: f64, w0: Complex64, v0: &[f64], max_steps: usize, period_steps: usize, stop: impl Fn(usize, f64) -> bool) -> Result<Run> {
        let sys = self.sys;
        let zero = sys.zero();
        let (grid, n) = (zero.grid, zero.n_comp);
        let tau = sys.tau();
        let c = self.opts.amplitude_bound;
        let mut flow = TruncatedFlow {
            eps: sys.eps(),
            a,
            dt: self.dt,
            truncation: self.opts.truncation,
            order: self.opts.order,
            times: Vec::new(),
            w: Vec::new(),
            radius: Vec::new(),
            theta: Vec::new(),
            theta_dot: Vec::new(),
            v_strong: Vec::new(),
            truncated_steps: 0,
            snapshots: Vec::new(),
            v_final: GridFunction::zeros(grid, n),
        };
        let mut at_period = None;
        let (mut w, mut v, mut theta) = (w0, v0.to_vec(), 0.0);
        let mut prev: Option<Forcing> = None;
        let mut k = 0;
        loop {
            let f = self.forcing(w, &v);
            let t = k as f64 * self.dt;
            let theta_dot = if w.norm() > 0.0 { tau + (f.w / w).im } else { tau };
            if w.norm() > 0.0 && theta_dot < 0.5 * tau {
                return Err(Error::Configuration(format!(
                    "angular speed {theta_dot:.4} fell below τ/2 at t = {t:.4}; the truncation constant C₀ = {} is too large for a = {a}",
                    self.opts.truncation
                )));
            }
            flow.times.push(t);
            flow.w.push(w);
            flow.radius.push(w.norm());
            flow.theta.push(theta);
            flow.theta_dot.push(theta_dot);
            flow.v_strong.push(sys.strong_norm(&v));
            if self.opts.snapshot_every > 0 && k % self.opts.snapshot_every == 0 {
                flow.snapshots.push((k, GridFunction::new(grid, n, v.clone())?));
            }
            if k == period_steps {
                at_period = Some((w, v.clone(), theta));
            }
            if k >= max_steps || stop(k, theta) {
                break;
            }
            if f.clamped {
                flow.truncated_steps += 1;
            }
            let mut w_next = self.growth * w + self.dt * self.phi1 * f.w;
            let source: Vec<f64> = match &prev {
                Some(p) => {
                    w_next += self.dt * self.phi2 * (f.w - p.w);
                    f.v.iter().zip(&p.v).map(|(x, y)| 1.5 * x - 0.5 * y).collect()
                }
                None => f.v.clone(),
            };
            let v_next = self.linear.step(&v, Some(&source));
            if w.norm() > 0.0 {
                theta += (w_next / w).arg();
            }
            k += 1;
            if !w_next.norm().is_finite() || v_next.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!("perturbation flow overflowed at t = {}", k as f64 * self.dt)));
            }
            if self.reference > 0.0 {
                let r = w_next.norm();
                if r < self.reference / c || r > c * self.reference {
                    return Err(Error::SmallnessBox(format!(
                        "|w| = {r:e} left [{:e}, {:e}] at t = {:.4}",
                        self.reference / c,
                        c * self.reference,
                        k as f64 * self.dt
                    )));
                }
            }
            w = w_next;
            v = v_next;
            prev = Some(f);
        }
        flow.v_final = GridFunction::new(grid, n, v)?;
        Ok(Run { flow, at_period })
    }
}

fn initial_transverse<M: PerturbationModel + ?Sized>(sys: &M, b: &GridFunction) -> Result<Vec<f64>> {
    sys.zero().check_same(b)?;
    Ok(b.values.clone())
}

/// Runs the truncated flow from `w(0) = a`, `v(0) = b` up to `t_end`, with
/// the step count rounded up from `t_end/Δt`, `Δt = (2π/τ)/steps`.
pub fn evolve_truncated<M: PerturbationModel + ?Sized>(sys: &M, a: f64, b: &GridFunction, t_end: f64, opts: &FlowOptions) -> Result<TruncatedFlow> {
    if !(t_end >= 0.0) {
        return Err(Error::Argument(format!("end time {t_end} must be nonnegative")));
    }
    let v0 = initial_transverse(sys, b)?;
    let nominal = sys.linear_period() / opts.steps as f64;
    let count = ((t_end / nominal).ceil() as usize).max(1);
    let stepper = Stepper::new(sys, opts, t_end.max(f64::MIN_POSITIVE) / count as f64, a.abs())?;
    let steps = if t_end == 0.0 { 0 } else { count };
    Ok(stepper.run(a, Complex64::new(a, 0.0), &v0, steps, usize::MAX, |_, _| false)?.flow)
}

/// Evolves a full perturbation `u0` for `t_end` in `steps` steps, splitting
/// it as `w = ⟨φ̃₊, u0⟩`, `v = Π̃u0`; returns `u(t_end)`.
pub fn evolve_state<M: PerturbationModel + ?Sized>(sys: &M, u0: &GridFunction, t_end: f64, steps: usize, opts: &FlowOptions) -> Result<GridFunction> {
    sys.zero().check_same(u0)?;
    let w0 = sys.coefficient(&u0.values);
    let v0 = sys.pi_tilde(&u0.values);
    let stepper = Stepper::new(sys, opts, t_end / steps as f64, w0.norm())?;
    let run = stepper.run(w0.norm(), w0, &v0, steps, usize::MAX, |_, _| false)?;
    GridFunction::new(u0.grid, u0.n_comp, sys.compose(run.flow.w_final(), &run.flow.v_final.values))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodSolve {
    /// `T` with `θ(T) = 2π` on the grid `Δt = T/steps`.
    pub period: f64,
    /// Hermite event estimate from the run at `Δt = (2π/τ)/steps`.
    pub event_estimate: f64,
    /// `|θ(T) − 2π|`.
    pub theta_residual: f64,
    /// Full runs taken, the event run included.
    pub runs: usize,
}

const THETA_TOL: f64 = 1e-12;

/// First return of `θ` to `2π`, searched in `[π/τ, 3π/τ]`. A run at
/// `Δt = (2π/τ)/steps` past the crossing gives a Hermite event estimate;
/// secant steps on `T ↦ θ(T) − 2π`, each a run of exactly `steps` steps,
/// refine it so the period lands on the step grid.
pub fn solve_period<M: PerturbationModel + ?Sized>(sys: &M, a: f64, b: &GridFunction, opts: &FlowOptions) -> Result<PeriodSolve> {
    solve_period_run(sys, a, b, opts).map(|(p, _)| p)
}

pub(super) fn solve_period_run<M: PerturbationModel + ?Sized>(sys: &M, a: f64, b: &GridFunction, opts: &FlowOptions) -> Result<(PeriodSolve, TruncatedFlow)> {
    if a == 0.0 {
        return Err(Error::Argument("the return time needs a ≠ 0".into()));
    }
    let v0 = initial_transverse(sys, b)?;
    let k = opts.steps;
    let t0 = sys.linear_period();
    let (lo, hi) = (0.5 * t0, 1.5 * t0);
    let w0 = Complex64::new(a, 0.0);
    let target = 2.0 * PI;

    let stepper = Stepper::new(sys, opts, t0 / k as f64, a.abs())?;
    let max_steps = (hi / stepper.dt).ceil() as usize;
    let event = stepper.run(a, w0, &v0, max_steps, k, |step, theta| step >= k && theta >= target)?;
    let fl = &event.flow;
    let cross = fl
        .theta
        .windows(2)
        .position(|p| p[0] < target && p[1] >= target)
        .ok_or_else(|| Error::NonConvergence(format!("θ does not reach 2π before t = {hi:.4}")))?;
    let (ta, tb) = (fl.times[cross], fl.times[cross + 1]);
    let (ya, yb, da, db) = (fl.theta[cross], fl.theta[cross + 1], fl.theta_dot[cross], fl.theta_dot[cross + 1]);
    let estimate = brent(|t| hermite(ta, ya, da, tb, yb, db, t) - target, ta, tb, 1e-15, 100)?;
    if estimate < lo || estimate > hi {
        return Err(Error::NonConvergence(format!("return time {estimate} outside [{lo}, {hi}]")));
    }

    let (wk, vk, thk) = event.at_period.clone().ok_or_else(|| Error::NonConvergence("event run ended before one period".into()))?;
    let finish = |w: Complex64, v: Vec<f64>, theta: f64, dt: f64, base: &TruncatedFlow| -> Result<TruncatedFlow> {
        let mut out = base.clone();
        out.times.truncate(k + 1);
        out.w.truncate(k + 1);
        out.radius.truncate(k + 1);
        out.theta.truncate(k + 1);
        out.theta_dot.truncate(k + 1);
        out.v_strong.truncate(k + 1);
        out.snapshots.retain(|(s, _)| *s <= k);
        out.dt = dt;
        debug_assert_eq!(*out.w.last().unwrap(), w);
        debug_assert_eq!(*out.theta.last().unwrap(), theta);
        out.v_final = GridFunction::new(b.grid, b.n_comp, v)?;
        Ok(out)
    };
    let mut runs = 1;
    let (mut t_prev, mut g_prev) = (t0, thk - target);
    if g_prev.abs() <= THETA_TOL {
        let flow = finish(wk, vk, thk, stepper.dt, fl)?;
        return Ok((PeriodSolve { period: t0, event_estimate: estimate, theta_residual: g_prev.abs(), runs }, flow));
    }
    let mut t = estimate;
    for _ in 0..20 {
        let st = Stepper::new(sys, opts, t / k as f64, a.abs())?;
        let run = st.run(a, w0, &v0, k, k, |_, _| false)?;
        runs += 1;
        let theta = *run.flow.theta.last().expect("nonempty");
        let g = theta - target;
        if g.abs() <= THETA_TOL {
            let flow = run.flow;
            return Ok((PeriodSolve { period: t, event_estimate: estimate, theta_residual: g.abs(), runs }, flow));
        }
        let next = t - g * (t - t_prev) / (g - g_prev);
        if !(next >= lo && next <= hi) {
            return Err(Error::NonConvergence(format!("secant on the return time left [{lo}, {hi}] at T = {next}")));
        }
        (t_prev, g_prev, t) = (t, g, next);
        if (t - t_prev).abs() <= 4.0 * f64::EPSILON * t {
            return Ok((PeriodSolve { period: t_prev, event_estimate: estimate, theta_residual: g_prev.abs(), runs }, run.flow));
        }
    }
    Err(Error::NonConvergence(format!("return time secant stalled at T = {t}")))
}
