//! Lyapunov–Schmidt reduction for a difference system
//! `â = R(ε,a,b)a + N₁`, `b̂ = S(ε,a,b)b + N₂`: the transverse fixed point
//! `b = B(ε,a,ω)`, the scalar branch equation for `ε(a)` and the translation
//! quotient.

mod ift;
mod normal_form;
mod quotient;

pub use ift::{brouwer_ift, ift_continuity, IftMethod, IftOptions, IftSolution};
pub use normal_form::HopfNormalForm;
pub use quotient::{quotient_translate, Translated, TranslationAction};

use crate::error::{Error, Result};
use crate::numerics::fit::fit_monomials;
use crate::spaces::{norm, GridFunction, NormKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Mutex;

/// One application of the return map at `(ε, a, b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepEval {
    /// `R(ε,a,b)`.
    pub r: f64,
    pub n1: f64,
    pub a_hat: f64,
    pub b_hat: GridFunction,
    /// `N₂ = b̂ − S(ε,a,b)b`.
    pub n2: GridFunction,
    /// Return time of this step.
    pub period: f64,
}

/// A discrete dynamical system split into a scalar block and a transverse
/// block. Implementations are called from several threads at once.
pub trait DiscreteSystem: Sync {
    /// The transverse origin, fixing grid and component count.
    fn zero_b(&self) -> GridFunction;

    fn evaluate(&self, eps: f64, a: f64, b: &GridFunction) -> Result<StepEval>;

    /// `(Id − S(ε,a,b))⁻¹N₂` for the `N₂` of `step`.
    fn right_inverse(&self, eps: f64, a: f64, b: &GridFunction, step: &StepEval) -> Result<GridFunction>;

    fn weak_norm(&self, b: &GridFunction) -> Result<f64> {
        norm(b, NormKind::B1, None)
    }

    fn strong_norm(&self, b: &GridFunction) -> Result<f64> {
        norm(b, NormKind::X1, None)
    }

    /// `f = (R − 1)a + N₁` and `‖g‖_{B1}` with `g = (S − 1)b + N₂ = b̂ − b`.
    fn residuals(&self, a: f64, b: &GridFunction, step: &StepEval) -> Result<(f64, f64)> {
        let mut g = step.b_hat.clone();
        g.axpy(-1.0, b)?;
        Ok(((step.r - 1.0) * a + step.n1, self.weak_norm(&g)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReduceOptions {
    /// Stop when the weak-norm increment drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Radius of the strong-norm ball the iterates must stay in.
    pub x1_radius: f64,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 60, x1_radius: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionResult {
    pub b: GridFunction,
    pub iterations: usize,
    /// Weak-norm increment of the last iteration.
    pub increment: f64,
    /// `‖B‖_{B1}/(‖ω‖_{B1} + a²)`, absent when the denominator vanishes.
    pub bound_constant: Option<f64>,
    /// The return map evaluated at `b`.
    pub step: StepEval,
}

/// Fixed point of `b ↦ ω + (Id − S)⁻¹N₂(ε,a,b)`, iterated from `initial`
/// (default `ω`). Every iterate must stay in the strong-norm ball.
pub fn reduce_b<S: DiscreteSystem + ?Sized>(
    system: &S,
    eps: f64,
    a: f64,
    omega: &GridFunction,
    initial: Option<&GridFunction>,
    opts: &ReduceOptions,
) -> Result<ReductionResult> {
    system.zero_b().check_same(omega)?;
    let mut b = initial.unwrap_or(omega).clone();
    b.check_same(omega)?;
    let mut step = system.evaluate(eps, a, &b)?;
    for k in 1..=opts.max_iter {
        let mut next = system.right_inverse(eps, a, &b, &step)?;
        next.axpy(1.0, omega)?;
        let strong = system.strong_norm(&next)?;
        if !(strong <= opts.x1_radius) {
            return Err(Error::SmallnessBox(format!(
                "iterate {k} left the X1 ball: ‖b‖ = {strong:e} > {:e} at ε = {eps}, a = {a}",
                opts.x1_radius
            )));
        }
        let mut d = next.clone();
        d.axpy(-1.0, &b)?;
        let increment = system.weak_norm(&d)?;
        b = next;
        step = system.evaluate(eps, a, &b)?;
        if increment < opts.tol {
            let denom = system.weak_norm(omega)? + a * a;
            let bound_constant = (denom > 0.0).then(|| system.weak_norm(&b).map(|v| v / denom)).transpose()?;
            return Ok(ReductionResult { b, iterations: k, increment, bound_constant, step });
        }
    }
    Err(Error::NonConvergence(format!("reduction did not converge in {} iterations at ε = {eps}, a = {a}", opts.max_iter)))
}

/// How `ω` is chosen along the branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OmegaRule {
    Zero,
    /// `ω = σ|a|·direction`, with `direction` in the kernel of `Id − S`.
    Kernel { sigma: f64, direction: GridFunction },
}

impl OmegaRule {
    pub fn omega(&self, zero: &GridFunction, a: f64) -> GridFunction {
        match self {
            OmegaRule::Zero => zero.clone(),
            OmegaRule::Kernel { sigma, direction } => direction.scaled(sigma * a.abs()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchOptions {
    /// Bound on `|f|` and `‖g‖_{B1}` at every returned point.
    pub tol: f64,
    pub reduce: ReduceOptions,
    pub ift: IftOptions,
}

impl Default for BranchOptions {
    fn default() -> Self {
        Self { tol: 1e-10, reduce: ReduceOptions::default(), ift: IftOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub a: f64,
    pub eps: f64,
    /// Return time `T*(a)`.
    pub period: f64,
    pub f_residual: f64,
    pub g_residual: f64,
    pub b: GridFunction,
    pub b_weak: f64,
    pub b_strong: f64,
    pub reduce_iterations: usize,
    pub ift_iterations: usize,
    pub bound_constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationCurve {
    /// Sorted by `a`.
    pub points: Vec<BranchPoint>,
    /// `∂_εR(0,0,0)`, secant estimate.
    pub gamma: f64,
    /// Coefficients of `ε ≈ c₂a² + c₄a⁴`, when at least two nonzero samples exist.
    pub even_fit: Option<Vec<f64>>,
    /// `(|a|, |ε(a)|/|a|)` by increasing `|a|`, nonzero `a` only.
    pub continuity: Vec<(f64, f64)>,
    /// The quotients in `continuity` increase with `|a|`.
    pub continuous_at_zero: bool,
}

impl BifurcationCurve {
    /// `+1` when `ε > 0` at every nonzero sample, `−1` when `ε < 0` at every
    /// one, `0` otherwise.
    pub fn direction(&self) -> i32 {
        let nz: Vec<f64> = self.points.iter().filter(|p| p.a != 0.0).map(|p| p.eps).collect();
        if !nz.is_empty() && nz.iter().all(|e| *e > 0.0) {
            1
        } else if !nz.is_empty() && nz.iter().all(|e| *e < 0.0) {
            -1
        } else {
            0
        }
    }
}

/// `f̄(ε,a) = f(ε,a,B)/(γa)`, continued to `a = 0` by `(R(ε,0,0) − 1)/γ`.
fn reduced_equation<S: DiscreteSystem + ?Sized>(
    system: &S,
    eps: f64,
    a: f64,
    gamma: f64,
    omega: &GridFunction,
    warm: &Mutex<Option<GridFunction>>,
    opts: &ReduceOptions,
) -> Result<(f64, ReductionResult)> {
    let initial = warm.lock().expect("warm start lock").clone();
    let red = reduce_b(system, eps, a, omega, initial.as_ref(), opts)?;
    *warm.lock().expect("warm start lock") = Some(red.b.clone());
    let value = if a == 0.0 {
        (red.step.r - 1.0) / gamma
    } else {
        ((red.step.r - 1.0) * a + red.step.n1) / (gamma * a)
    };
    Ok((value, red))
}

fn solve_point<S: DiscreteSystem + ?Sized>(
    system: &S,
    a: f64,
    gamma: f64,
    rule: &OmegaRule,
    opts: &BranchOptions,
) -> Result<BranchPoint> {
    let zero = system.zero_b();
    let omega = rule.omega(&zero, a);
    let warm = Mutex::new(None);
    let last = Mutex::new(None);
    let f = |eps: f64, aa: f64| -> Result<f64> {
        if aa == 0.0 && a != 0.0 {
            // the a = 0 slice used for the derivative and F(0,0) checks
            let (v, _) = reduced_equation(system, eps, 0.0, gamma, &zero, &Mutex::new(None), &opts.reduce)?;
            return Ok(v);
        }
        let (v, red) = reduced_equation(system, eps, aa, gamma, &omega, &warm, &opts.reduce)?;
        *last.lock().expect("lock") = Some((eps, red));
        Ok(v)
    };
    let sol = brouwer_ift(&f, Some(1.0), a, &opts.ift)?;
    // make sure the stored reduction belongs to the accepted ε
    let red = match last.into_inner().expect("lock") {
        Some((e, red)) if e == sol.delta => red,
        _ => reduced_equation(system, sol.delta, a, gamma, &omega, &warm, &opts.reduce)?.1,
    };
    let (fr, gr) = system.residuals(a, &red.b, &red.step)?;
    if !(fr.abs() <= opts.tol && gr <= opts.tol) {
        return Err(Error::NonConvergence(format!("residuals |f| = {:e}, ‖g‖ = {gr:e} above {:e}", fr.abs(), opts.tol)));
    }
    Ok(BranchPoint {
        a,
        eps: sol.delta,
        period: red.step.period,
        f_residual: fr.abs(),
        g_residual: gr,
        b_weak: system.weak_norm(&red.b)?,
        b_strong: system.strong_norm(&red.b)?,
        b: red.b,
        reduce_iterations: red.iterations,
        ift_iterations: sol.iterations,
        bound_constant: red.bound_constant,
    })
}

/// `∂_εR(0,0,0)` by a central secant, after checking `R(0,0,0) = 1` and
/// `(f, g)(ε,0,0) = 0`.
pub fn primary_rate<S: DiscreteSystem + ?Sized>(system: &S) -> Result<f64> {
    let zero = system.zero_b();
    let s0 = system.evaluate(0.0, 0.0, &zero)?;
    if (s0.r - 1.0).abs() > 1e-8 {
        return Err(Error::SpectralAssumption(format!("R(0,0,0) = {} instead of 1", s0.r)));
    }
    let h = 1e-4;
    let (sp, sm) = (system.evaluate(h, 0.0, &zero)?, system.evaluate(-h, 0.0, &zero)?);
    for s in [&s0, &sp, &sm] {
        let (f, g) = system.residuals(0.0, &zero, s)?;
        if f != 0.0 || g > 1e-14 {
            return Err(Error::Argument(format!("trivial state is not fixed: f = {f:e}, ‖g‖ = {g:e}")));
        }
    }
    let gamma = (sp.r - sm.r) / (2.0 * h);
    if !(gamma.abs() > 1e-8) {
        return Err(Error::SpectralAssumption(format!("∂εR(0,0,0) = {gamma:e} is not transversal")));
    }
    Ok(gamma)
}

/// Solves `f(ε,a,B(ε,a,ω)) = 0` for `ε` at each sample, in parallel.
pub fn solve_branch<S: DiscreteSystem + ?Sized>(
    system: &S,
    a_samples: &[f64],
    rule: &OmegaRule,
    opts: &BranchOptions,
) -> Result<BifurcationCurve> {
    let gamma = primary_rate(system)?;
    let mut points: Vec<BranchPoint> = a_samples
        .par_iter()
        .map(|&a| solve_point(system, a, gamma, rule, opts).map_err(|e| Error::AtSample { a, source: Box::new(e) }))
        .collect::<Result<_>>()?;
    points.sort_by(|p, q| p.a.total_cmp(&q.a));
    let nz: Vec<&BranchPoint> = points.iter().filter(|p| p.a != 0.0).collect();
    let even_fit = if nz.len() >= 2 {
        let x: Vec<f64> = nz.iter().map(|p| p.a).collect();
        let y: Vec<f64> = nz.iter().map(|p| p.eps).collect();
        Some(fit_monomials(&x, &y, &[2, 4])?)
    } else {
        None
    };
    let mut continuity: Vec<(f64, f64)> = nz.iter().map(|p| (p.a.abs(), p.eps.abs() / p.a.abs())).collect();
    continuity.sort_by(|p, q| p.0.total_cmp(&q.0));
    let continuous_at_zero = continuity.windows(2).all(|w| w[0].1 <= w[1].1 || w[0].0 == w[1].0);
    Ok(BifurcationCurve { points, gamma, even_fit, continuity, continuous_at_zero })
}
