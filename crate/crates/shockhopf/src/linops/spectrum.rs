use super::DiscreteLinearOperator;
use crate::error::{Error, Result};
use crate::numerics::arnoldi::{inverse_iteration, ritz_values};
use crate::numerics::{dotc, dotu, norm2};
use crate::spaces::{cumulative_trapezoid, GridFunction};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Region of the complex plane searched for discrete eigenvalues.
///
/// `re_min` should sit to the right of the discretized essential spectrum;
/// eigenvalues within `zero_radius` of the origin count as the translational
/// mode. Shifts are placed on a lattice of the given spacing covering
/// `[0, re_max] × [0, im_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_max: f64,
    pub zero_radius: f64,
    pub shift_spacing: f64,
    pub krylov_dim: usize,
}

impl Default for SearchBox {
    fn default() -> Self {
        Self { re_min: -0.05, re_max: 1.0, im_max: 4.0, zero_radius: 1e-4, shift_spacing: 0.5, krylov_dim: 30 }
    }
}

impl SearchBox {
    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im.abs() <= self.im_max
    }

    fn shifts(&self) -> Vec<Complex64> {
        let s = self.shift_spacing;
        let nr = (self.re_max.max(0.0) / s).ceil() as usize;
        let ni = (self.im_max / s).ceil() as usize;
        let mut out = Vec::new();
        for a in 0..=nr {
            for b in 0..=ni {
                out.push(Complex64::new(a as f64 * s, b as f64 * s));
            }
        }
        out
    }
}

/// The crossing pair `λ± = γ ± iτ` with right and left eigenfunctions of
/// `λ₊`; the `λ₋` data are the complex conjugates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPair {
    pub eps: f64,
    pub lambda: Complex64,
    /// `φ₊`, normalized to `h·Σ|φ₊|² = 1`.
    pub right: GridFunction<Complex64>,
    /// `φ̃₊` with `h·Σ φ̃₊·φ₊ = 1` (bilinear, no conjugation).
    pub left: GridFunction<Complex64>,
    /// Running integral `Φ₊` of `φ₊`.
    pub antiderivative: GridFunction<Complex64>,
    /// `‖Lφ − λφ‖/‖φ‖` for the right and left eigenfunctions.
    pub residual: f64,
    pub left_residual: f64,
    /// Largest `|h·Σ φ₊|` over components.
    pub mass: f64,
    /// Other eigenvalues found in the box, upper half plane only.
    pub others: Vec<Complex64>,
}

impl SpectralPair {
    pub fn gamma(&self) -> f64 {
        self.lambda.re
    }

    pub fn tau(&self) -> f64 {
        self.lambda.im
    }

    pub fn row(&self) -> SpectrumRow {
        SpectrumRow {
            eps: self.eps,
            gamma: self.gamma(),
            tau: self.tau(),
            residual: self.residual,
            left_residual: self.left_residual,
            mass: self.mass,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub eps: f64,
    pub gamma: f64,
    pub tau: f64,
    pub residual: f64,
    pub left_residual: f64,
    pub mass: f64,
}

fn start_vector(m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|i| {
            let t = i as f64;
            Complex64::new(1.0 + 0.3 * (0.7 * t).sin(), 0.2 * (1.3 * t).cos())
        })
        .collect()
}

fn residual(op: &DiscreteLinearOperator, v: &[Complex64], lambda: Complex64, transpose: bool) -> f64 {
    let lv = if transpose { op.apply_transpose_complex(v) } else { op.apply_complex(v) };
    let r: Vec<Complex64> = lv.iter().zip(v).map(|(a, b)| a - lambda * b).collect();
    norm2(&r) / norm2(v)
}

/// Rayleigh-quotient inverse iteration from `mu`. Returns the eigenvalue,
/// the unit eigenvector and its residual.
fn polish(op: &DiscreteLinearOperator, mu: Complex64) -> Result<(Complex64, Vec<Complex64>, f64)> {
    let mut mu = mu;
    let mut v = start_vector(op.dim());
    let mut res = f64::INFINITY;
    for _ in 0..6 {
        let solver = op.shifted_solver(mu, false)?;
        v = inverse_iteration(|x| solver.solve(x), &v, 2);
        if v.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numerical(format!("inverse iteration at {mu} produced non-finite values")));
        }
        let lv = op.apply_complex(&v);
        mu = dotc(&v, &lv) / dotc(&v, &v);
        res = residual(op, &v, mu, false);
        if res < 1e-11 {
            break;
        }
    }
    Ok((mu, v, res))
}

/// Eigenvalues in the box (upper half plane), each polished to a residual
/// below `1e-8`, sorted by decreasing real part.
pub fn box_eigenvalues(op: &DiscreteLinearOperator, bx: &SearchBox) -> Result<Vec<Complex64>> {
    let m = op.dim();
    let v0 = start_vector(m);
    let mut found: Vec<Complex64> = Vec::new();
    let radius = bx.shift_spacing;
    for sigma in bx.shifts() {
        let solver = op.shifted_solver(sigma, false)?;
        let theta = ritz_values(|x| solver.solve(x), &v0, bx.krylov_dim)?;
        for t in theta {
            if t.norm() < 1e-300 {
                continue;
            }
            let cand = sigma + 1.0 / t;
            if (cand - sigma).norm() > radius || cand.im < -1e-8 {
                continue;
            }
            let enlarged = SearchBox { re_min: bx.re_min - radius, re_max: bx.re_max + radius, im_max: bx.im_max + radius, ..*bx };
            if !enlarged.contains(cand) || found.iter().any(|z| (z - cand).norm() < 1e-6 * cand.norm().max(1.0)) {
                continue;
            }
            let (mu, _, res) = polish(op, cand)?;
            if res > 1e-8 || !bx.contains(mu) {
                continue;
            }
            let mu = if mu.im.abs() < 1e-10 { Complex64::new(mu.re, 0.0) } else { mu };
            if mu.im < 0.0 {
                continue;
            }
            if !found.iter().any(|z| (z - mu).norm() < 1e-6 * mu.norm().max(1.0)) {
                found.push(mu);
            }
        }
    }
    found.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(found)
}

/// All eigenvalues of the dense matrix; limited to 400 unknowns.
pub fn dense_spectrum(op: &DiscreteLinearOperator) -> Result<Vec<Complex64>> {
    if op.dim() > 400 {
        return Err(Error::Argument(format!("dense eigensolve limited to 400 unknowns, got {}", op.dim())));
    }
    Ok(op.dense().complex_eigenvalues().iter().copied().collect())
}

/// Locates the conjugate pair with the largest real part in the box and
/// certifies that no other eigenvalue away from the origin has `ℜλ ≥ 0`.
pub fn crossing_pair(op: &DiscreteLinearOperator, bx: &SearchBox) -> Result<SpectralPair> {
    let eig = box_eigenvalues(op, bx)?;
    let nonzero: Vec<Complex64> = eig.into_iter().filter(|z| z.norm() > bx.zero_radius).collect();
    let lambda = *nonzero
        .iter()
        .find(|z| z.im > 1e-8)
        .ok_or_else(|| Error::SpectralAssumption(format!("no conjugate pair in the search box; found {nonzero:?}")))?;
    let others: Vec<Complex64> = nonzero.iter().copied().filter(|z| *z != lambda).collect();
    let unstable: Vec<Complex64> = others.iter().copied().filter(|z| z.re >= 0.0).collect();
    if !unstable.is_empty() {
        let list: Vec<String> = unstable.iter().map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
        return Err(Error::ExtraUnstable(format!("[{}] besides the pair {lambda:.6}", list.join(", "))));
    }
    let (lambda, v, _) = polish(op, lambda)?;
    pair_from_vector(op, lambda, v, others)
}

/// Completes an eigenpair `(λ, v)` of `op` to a [`SpectralPair`]: normalizes
/// `v`, computes the left eigenfunction by inverse iteration on `Lᵀ` and
/// both residuals.
pub fn pair_from_vector(
    op: &DiscreteLinearOperator,
    lambda: Complex64,
    mut v: Vec<Complex64>,
    others: Vec<Complex64>,
) -> Result<SpectralPair> {
    if v.len() != op.dim() {
        return Err(Error::Dimension("eigenvector length differs from the operator size".into()));
    }
    let res = residual(op, &v, lambda, false);
    let g = op.grid();
    let h = g.h();
    // normalize: h·Σ|φ|² = 1, largest entry real positive
    let (imax, _) = v.iter().enumerate().fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let phase = v[imax].conj() / v[imax].norm();
    let s = (h * dotc(&v, &v).re).sqrt();
    v.iter_mut().for_each(|z| *z *= phase / s);

    let tsolver = op.shifted_solver(lambda, true)?;
    let mut w = inverse_iteration(|x| tsolver.solve(x), &start_vector(op.dim()), 3);
    let left_residual = residual(op, &w, lambda, true);
    let d = dotu(&w, &v) * h;
    if d.norm() < 1e-10 * norm2(&w) * norm2(&v) * h {
        return Err(Error::Numerical("left and right eigenfunctions are nearly orthogonal".into()));
    }
    w.iter_mut().for_each(|z| *z /= d);

    let n = op.components();
    let mass = op.mass(&v).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let right = GridFunction::new(g, n, v)?;
    let mut anti = vec![Complex64::new(0.0, 0.0); op.dim()];
    for c in 0..n {
        for (i, val) in cumulative_trapezoid(&right.component(c), h).into_iter().enumerate() {
            anti[i * n + c] = val;
        }
    }
    Ok(SpectralPair {
        eps: op.eps(),
        lambda,
        left: GridFunction::new(g, n, w)?,
        antiderivative: GridFunction::new(g, n, anti)?,
        right,
        residual: res,
        left_residual,
        mass,
        others,
    })
}

/// `γ(ε)`, `τ(ε)` along a family with the secant slope of `γ` across `ε = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingScan {
    pub rows: Vec<SpectrumRow>,
    /// Secant slope of `γ` between the samples closest to zero on either side.
    pub slope: Option<f64>,
    /// `sign γ = sign ε` at every sample and positive slope.
    pub transversal: bool,
}

pub fn crossing_family<F>(make: F, eps: &[f64], bx: &SearchBox) -> Result<CrossingScan>
where
    F: Fn(f64) -> Result<DiscreteLinearOperator>,
{
    let mut rows = Vec::with_capacity(eps.len());
    for &e in eps {
        rows.push(crossing_pair(&make(e)?, bx)?.row());
    }
    let below = rows.iter().filter(|r| r.eps < 0.0).max_by(|a, b| a.eps.total_cmp(&b.eps));
    let above = rows.iter().filter(|r| r.eps > 0.0).min_by(|a, b| a.eps.total_cmp(&b.eps));
    let slope = match (below, above) {
        (Some(a), Some(b)) => Some((b.gamma - a.gamma) / (b.eps - a.eps)),
        _ => None,
    };
    let signs = rows.iter().all(|r| r.eps == 0.0 || r.gamma.signum() == r.eps.signum());
    Ok(CrossingScan { transversal: signs && slope.is_some_and(|s| s > 0.0), rows, slope })
}
