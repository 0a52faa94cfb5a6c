//! Right inverses `(Id − S)⁻¹ ∂ₓn` as conditionally convergent Neumann
//! series, with cancellation-resummed kernel tails and continuization error.

mod tails;

pub use tails::{
    cauchy_envelope, continuization_error, naive_sum_norms, resummed_tail, time_quadrature, CauchyEnvelope,
    ContinuizationReport, NaiveSeries, TailMode,
};

use crate::error::{Error, Result};
use crate::kernels::{ModelKernel, TransverseKernel};
use crate::spaces::{norm, Grid1D, GridFunction, NormKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One period of a transverse linear evolution `S` on a fixed grid.
pub trait OneStep: Sync {
    fn grid(&self) -> Grid1D;
    fn components(&self) -> usize;
    fn period(&self) -> f64;
    fn apply(&self, f: &GridFunction) -> Result<GridFunction>;
    /// Fails when `S` still carries modes that must be projected out before
    /// the series can converge.
    fn check_transverse(&self) -> Result<()> {
        Ok(())
    }
    fn model_kernel(&self) -> Option<&ModelKernel> {
        None
    }
}

/// Dense quadrature matrix of a kernel on a grid: `(Sf)_i = Σ_j w_j G(x_i,T;y_j) f_j`.
#[derive(Clone, Debug)]
pub struct KernelStep {
    grid: Grid1D,
    n: usize,
    period: f64,
    matrix: Vec<f64>,
    kernel: Option<ModelKernel>,
}

impl KernelStep {
    pub fn new<G: TransverseKernel + ?Sized>(g: &G, period: f64, grid: Grid1D, scale: f64) -> Result<Self> {
        if period <= 0.0 {
            return Err(Error::Domain(format!("period must be positive, got {period}")));
        }
        let n = g.components();
        let m = grid.len() * n;
        let w = grid.weights();
        let rows: Result<Vec<Vec<f64>>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut block = vec![0.0; n * m];
                let mut v = vec![0.0; n * n];
                for (j, wj) in w.iter().enumerate() {
                    g.kernel_value(grid.x(i), period, grid.x(j), &mut v)?;
                    for r in 0..n {
                        for c in 0..n {
                            block[r * m + j * n + c] = scale * wj * v[r * n + c];
                        }
                    }
                }
                Ok(block)
            })
            .collect();
        Ok(Self { grid, n, period, matrix: rows?.concat(), kernel: None })
    }

    /// Mass-preserving model step `K(·,T;·)/√(4π)` with transport speed `a`.
    pub fn model(a: f64, period: f64, grid: Grid1D) -> Result<Self> {
        let k = ModelKernel::scattering(a)?;
        let mut s = Self::new(&k, period, grid, 1.0 / (4.0 * PI).sqrt())?;
        s.kernel = Some(k);
        Ok(s)
    }
}

impl OneStep for KernelStep {
    fn grid(&self) -> Grid1D {
        self.grid
    }

    fn components(&self) -> usize {
        self.n
    }

    fn period(&self) -> f64 {
        self.period
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid != self.grid || f.n_comp != self.n {
            return Err(Error::Dimension("input does not live on the step's grid".into()));
        }
        let m = f.values.len();
        let out: Vec<f64> = self
            .matrix
            .par_chunks(m)
            .map(|row| row.iter().zip(&f.values).map(|(a, b)| a * b).sum())
            .collect();
        GridFunction::new(self.grid, self.n, out)
    }

    fn model_kernel(&self) -> Option<&ModelKernel> {
        self.kernel.as_ref()
    }
}

/// Second-order centered `∂ₓ` with one-sided closures, per component.
pub fn derivative(f: &GridFunction) -> GridFunction {
    let g = f.grid;
    let (n, m, h) = (f.n_comp, g.len(), g.h());
    let mut out = GridFunction::zeros(g, n);
    for c in 0..n {
        let v = |i: usize| f.at(i, c);
        for i in 0..m {
            out.values[i * n + c] = if i == 0 {
                (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
            } else if i == m - 1 {
                (3.0 * v(m - 1) - 4.0 * v(m - 2) + v(m - 3)) / (2.0 * h)
            } else {
                (v(i + 1) - v(i - 1)) / (2.0 * h)
            };
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Continuization {
    None,
    Trapezoid,
    Simpson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub j: usize,
    /// `‖S^j N₂‖_{B1}`.
    pub increment_norm: f64,
    /// `∫ S^j N₂ dx` per component.
    pub term_mass: Vec<f64>,
    /// `∫ Σ_{i≤j} S^i N₂ dx` per component.
    pub cumulative_mass: Vec<f64>,
    /// Kept at dyadic term counts and at the stop index only.
    pub partial_sum: Option<GridFunction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesLedger {
    pub records: Vec<SeriesRecord>,
    /// `(N, ‖B_N − B_{N/2}‖_{B1})` at powers of two.
    pub dyadic_increments: Vec<(usize, f64)>,
    /// Geometric mean of `Δ_N (NT)^{1/4}` over the dyadic increments.
    pub envelope_constant: Option<f64>,
    pub continuization: Continuization,
    pub stop_index: usize,
    /// `‖(Id − S)b − N₂‖_{B1}`, evaluated directly.
    pub residual: Option<f64>,
}

impl SeriesLedger {
    pub fn summary(&self) -> String {
        let last = self.dyadic_increments.last().map(|d| format!("{:e} at N={}", d.1, d.0)).unwrap_or_default();
        format!("{} terms, last dyadic increment {last}", self.records.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopRule {
    /// Dyadic increments below tolerance and inside ten times the fitted
    /// `(NT)^{−1/4}` envelope.
    Envelope,
    /// Single increments below tolerance.
    RawTolerance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RightInverseOptions {
    pub tol: f64,
    pub max_terms: usize,
    pub stop: StopRule,
}

impl Default for RightInverseOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_terms: 1 << 16, stop: StopRule::Envelope }
    }
}

/// Bound on `Σ_{k≥1} Δ_{2^k N}` relative to `Δ_N` for a `(NT)^{−1/4}` envelope,
/// plus the increment itself.
const DYADIC_TAIL_FACTOR: f64 = 6.285_442_7;

/// `b = Σ_j S^j ∂ₓn` with its ledger.
pub fn apply_right_inverse(
    op: &dyn OneStep,
    n_density: &GridFunction,
    opts: &RightInverseOptions,
) -> Result<(GridFunction, SeriesLedger)> {
    if n_density.grid != op.grid() || n_density.n_comp != op.components() {
        return Err(Error::Dimension("density does not live on the operator's grid".into()));
    }
    apply_right_inverse_values(op, &derivative(n_density), opts)
}

/// `b = Σ_j S^j N₂` for `N₂` given by its values rather than a density.
pub fn apply_right_inverse_values(
    op: &dyn OneStep,
    n2: &GridFunction,
    opts: &RightInverseOptions,
) -> Result<(GridFunction, SeriesLedger)> {
    op.check_transverse()?;
    if n2.grid != op.grid() || n2.n_comp != op.components() {
        return Err(Error::Dimension("N₂ does not live on the operator's grid".into()));
    }
    let n2 = n2.clone();
    let t = op.period();
    let b1 = |f: &GridFunction| norm(f, NormKind::B1, None);
    let mut ledger = SeriesLedger {
        records: Vec::new(),
        dyadic_increments: Vec::new(),
        envelope_constant: None,
        continuization: Continuization::None,
        stop_index: 0,
        residual: None,
    };
    let mut b = GridFunction::zeros(op.grid(), op.components());
    if n2.values.iter().all(|v| *v == 0.0) {
        ledger.records.push(SeriesRecord {
            j: 0,
            increment_norm: 0.0,
            term_mass: vec![0.0; b.n_comp],
            cumulative_mass: vec![0.0; b.n_comp],
            partial_sum: Some(b.clone()),
        });
        ledger.residual = Some(0.0);
        return Ok((b, ledger));
    }
    let mut term = n2.clone();
    let mut half = b.clone();
    let mut log_c = Vec::new();
    for j in 0..opts.max_terms {
        b.axpy(1.0, &term)?;
        let count = j + 1;
        let dyadic = count.is_power_of_two();
        let inc = b1(&term)?;
        ledger.records.push(SeriesRecord {
            j,
            increment_norm: inc,
            term_mass: term.integral(),
            cumulative_mass: b.integral(),
            partial_sum: dyadic.then(|| b.clone()),
        });
        let next = op.apply(&term)?;
        let stop = match opts.stop {
            StopRule::RawTolerance => inc < opts.tol,
            StopRule::Envelope if dyadic && count >= 2 => {
                let mut d = b.clone();
                d.axpy(-1.0, &half)?;
                let delta = b1(&d)?;
                ledger.dyadic_increments.push((count, delta));
                let scale = (count as f64 * t).powf(0.25);
                let prior = (!log_c.is_empty()).then(|| (log_c.iter().sum::<f64>() / log_c.len() as f64).exp());
                if delta > 0.0 {
                    log_c.push((delta * scale).ln());
                }
                ledger.envelope_constant = Some((log_c.iter().sum::<f64>() / log_c.len().max(1) as f64).exp());
                let inside = prior.is_some_and(|c| delta <= 10.0 * c / scale);
                DYADIC_TAIL_FACTOR * delta < opts.tol && b1(&next)? < opts.tol && inside
            }
            StopRule::Envelope => false,
        };
        if dyadic {
            half = b.clone();
        }
        if stop {
            ledger.stop_index = j;
            if let Some(r) = ledger.records.last_mut() {
                r.partial_sum = Some(b.clone());
            }
            let mut res = b.clone();
            res.axpy(-1.0, &op.apply(&b)?)?;
            res.axpy(-1.0, &n2)?;
            let r = b1(&res)?;
            ledger.residual = Some(r);
            if r > opts.tol {
                return Err(Error::NonConvergence(format!(
                    "defining-equation residual {r:e} exceeds tolerance {:e}; {}",
                    opts.tol,
                    ledger.summary()
                )));
            }
            return Ok((b, ledger));
        }
        term = next;
    }
    ledger.stop_index = opts.max_terms;
    Err(Error::SeriesNonConvergence(Box::new(ledger)))
}

/// Difference quotients in ε of `b(ε)` and, for model-kernel steps, of the
/// cancelled tail column at `y = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub deltas: Vec<f64>,
    pub b_quotients: Vec<f64>,
    pub tail_quotients: Option<Vec<f64>>,
}

/// All perturbed solves reuse the term count of the base solve, so the
/// quotients difference one smooth function of ε.
pub fn lipschitz_in_parameter<F, S>(
    family: F,
    n_density: &GridFunction,
    eps0: f64,
    deltas: &[f64],
    opts: &RightInverseOptions,
) -> Result<LipschitzReport>
where
    F: Fn(f64) -> Result<S>,
    S: OneStep,
{
    let base = family(eps0)?;
    let (b0, ledger) = apply_right_inverse(&base, n_density, opts)?;
    let count = ledger.stop_index + 1;
    let tail_of = |op: &S| -> Result<Option<GridFunction>> {
        match op.model_kernel() {
            Some(k) => Ok(Some(resummed_tail(k, op.period(), None, TailMode::Cancelled, &op.grid(), 0.0)?)),
            None => Ok(None),
        }
    };
    let tail0 = tail_of(&base)?;
    let mut b_q = Vec::new();
    let mut t_q = Vec::new();
    for &d in deltas {
        let op = family(eps0 + d)?;
        let b = partial_sum(&op, n_density, count)?;
        let mut diff = b.clone();
        diff.axpy(-1.0, &b0)?;
        b_q.push(norm(&diff, NormKind::B1, None)? / d.abs());
        if let (Some(t0), Some(t1)) = (&tail0, tail_of(&op)?) {
            let mut diff = t1;
            diff.axpy(-1.0, t0)?;
            t_q.push(norm(&diff, NormKind::B1, None)? / d.abs());
        }
    }
    Ok(LipschitzReport {
        deltas: deltas.to_vec(),
        b_quotients: b_q,
        tail_quotients: tail0.map(|_| t_q),
    })
}

/// `Σ_{j<count} S^j ∂ₓn`.
pub fn partial_sum(op: &dyn OneStep, n_density: &GridFunction, count: usize) -> Result<GridFunction> {
    let mut b = GridFunction::zeros(op.grid(), op.components());
    let mut term = derivative(n_density);
    for j in 0..count {
        b.axpy(1.0, &term)?;
        if j + 1 < count {
            term = op.apply(&term)?;
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_is_second_order() {
        let g = Grid1D::new(3.0, 61).unwrap();
        let f = g.sample(|x| x.sin());
        let d = derivative(&f);
        for (i, x) in g.nodes().iter().enumerate() {
            assert!((d.values[i] - x.cos()).abs() < 5e-3);
        }
    }

    #[test]
    fn model_step_preserves_mass_in_the_interior() {
        let g = Grid1D::new(40.0, 321).unwrap();
        let s = KernelStep::model(-1.0, 1.0, g).unwrap();
        let f = g.sample(|x| (-x * x).exp());
        let m0 = f.integral()[0];
        let m1 = s.apply(&f).unwrap().integral()[0];
        assert!((m1 / m0 - 1.0).abs() < 1e-10);
    }
}
