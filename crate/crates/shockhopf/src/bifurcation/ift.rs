use crate::error::{Error, Result};
use crate::numerics::roots::brent;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IftOptions {
    /// Target for `|F(δ,a)|`.
    pub tol: f64,
    /// Half-width of the search ball in `δ`.
    pub radius: f64,
    pub max_iter: usize,
    /// Relaxation factor of the fixed-point step.
    pub damping: f64,
    /// Allowed `|F(0,0)|`.
    pub origin_tol: f64,
}

impl Default for IftOptions {
    fn default() -> Self {
        Self { tol: 1e-13, radius: 0.1, max_iter: 200, damping: 1.0, origin_tol: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IftMethod {
    FixedPoint,
    Brent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IftSolution {
    pub delta: f64,
    /// `|F(δ,a)|`.
    pub residual: f64,
    pub iterations: usize,
    pub method: IftMethod,
    /// `∂_δF(0,0)` as used.
    pub df0: f64,
}

/// Solves `F(δ,a) = 0` near `δ = 0` from `F(0,0) = 0` and `∂_δF(0,0) ≠ 0`.
///
/// With `n₁(δ) = F(δ,0)/F′ − δ` and `n₂(δ,a) = (F(δ,a) − F(δ,0))/F′` the
/// equation reads `δ = −n₁(δ) − n₂(δ,a)`, i.e. the chord iteration
/// `δ ← δ − F(δ,a)/F′`, run with damping inside the ball `|δ| ≤ radius`.
/// When it leaves the ball or stalls, Brent's method on the ball is tried.
pub fn brouwer_ift<F>(f: F, df0: Option<f64>, a: f64, opts: &IftOptions) -> Result<IftSolution>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let f00 = f(0.0, 0.0)?;
    if !(f00.abs() <= opts.origin_tol) {
        return Err(Error::Argument(format!("F(0,0) = {f00:e} is not zero")));
    }
    let d = match df0 {
        Some(d) => d,
        None => {
            let h = 1e-6;
            (f(h, 0.0)? - f(-h, 0.0)?) / (2.0 * h)
        }
    };
    if !(d.abs() > 1e-12) || !d.is_finite() {
        return Err(Error::Argument(format!("∂δF(0,0) = {d:e} is not invertible")));
    }
    let mut delta = 0.0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let v = f(delta, a)?;
        if v.abs() <= opts.tol {
            return Ok(IftSolution { delta, residual: v.abs(), iterations, method: IftMethod::FixedPoint, df0: d });
        }
        iterations += 1;
        delta -= opts.damping * v / d;
        if !(delta.abs() <= opts.radius) {
            break;
        }
    }

    let err = RefCell::new(None);
    let g = |x: f64| match f(x, a) {
        Ok(v) => v,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let (lo, hi) = (g(-opts.radius), g(opts.radius));
    if let Some(e) = err.borrow_mut().take() {
        return Err(e);
    }
    if !(lo * hi <= 0.0) {
        return Err(Error::RootNotFound(format!(
            "a = {a}: fixed-point iteration left |δ| ≤ {} and F has no sign change there",
            opts.radius
        )));
    }
    let root = brent(g, -opts.radius, opts.radius, 1e-15, 200);
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let delta = root?;
    let residual = f(delta, a)?.abs();
    if residual > opts.tol.max(1e3 * f64::EPSILON * delta.abs()) {
        return Err(Error::RootNotFound(format!("a = {a}: Brent stopped at |F| = {residual:e}")));
    }
    Ok(IftSolution { delta, residual, iterations, method: IftMethod::Brent, df0: d })
}

/// `(a_k, |δ(a_k)|/a_k)` for `a_k = 2^{−k}`, `k = 1..=k_max`.
pub fn ift_continuity<F>(f: F, df0: Option<f64>, k_max: u32, opts: &IftOptions) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    (1..=k_max)
        .map(|k| {
            let a = 0.5f64.powi(k as i32);
            brouwer_ift(&f, df0, a, opts).map(|s| (a, s.delta.abs() / a))
        })
        .collect()
}
