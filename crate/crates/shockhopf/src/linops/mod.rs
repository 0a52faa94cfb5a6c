//! Discretized linearized operator `L(ε) = −∂ₓA(x) + ∂ₓ²` about a standing
//! profile: assembly, spectrum near the imaginary axis, spectral projections
//! and Crank–Nicolson time stepping.
//!
//! Unknowns are stored node-major (`i·n + c`) on the profile grid. Values
//! beyond the last node are taken as zero (homogeneous Dirichlet closure),
//! which keeps the flux-difference stencil telescoping so that
//! `h·Σ(Lf)_i` reduces to boundary terms.

mod envelope;
mod planted;
mod semigroup;
mod spectrum;

pub use envelope::{dispersion, essential_envelope, EssentialEnvelope};
pub use planted::{bump_modes, exemplar_operator, CrossingDesign, PlantedModes};
pub use semigroup::{projections, semigroup_step, Projectors, Semigroup};
pub use spectrum::{box_eigenvalues, crossing_family, crossing_pair, dense_spectrum, pair_from_vector, CrossingScan, SearchBox, SpectralPair, SpectrumRow};

use crate::error::{Error, Result};
use crate::numerics::band::{BandMatrix, LowRankSolver};
use crate::numerics::{dotu, Scalar};
use crate::profiles::{null_vector, real_eigensystem, Flux, ShockProfile};
use crate::spaces::{Grid1D, GridFunction};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closure {
    /// Zero ghost values outside the grid.
    Dirichlet,
}

/// `L` as a banded matrix, optionally with a planted low-rank term.
#[derive(Clone, Debug)]
pub struct DiscreteLinearOperator {
    grid: Grid1D,
    n: usize,
    eps: f64,
    closure: Closure,
    band: BandMatrix<f64>,
    /// `A(x_i)` row-major per node.
    coefficients: Vec<f64>,
    a_minus: DMatrix<f64>,
    a_plus: DMatrix<f64>,
    profile: ShockProfile,
    zero: Option<ZeroMode>,
    planted: Option<PlantedModes>,
}

/// Discrete translational mode and the constant left vector `ℓ` with
/// `⟨ℓ, ψ₀⟩ = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroMode {
    pub mode: GridFunction,
    pub eigenvalue: f64,
    pub ell: Vec<f64>,
}

/// Band of `−∂ₓ(A·) + ∂ₓ²` for nodal coefficients `A(x_i)` (row-major `n×n`
/// per node) under the zero-ghost closure.
pub(crate) fn assemble_band(grid: Grid1D, n: usize, coefficients: &[f64]) -> BandMatrix<f64> {
    let m = grid.len();
    let h = grid.h();
    let w = 2 * n - 1;
    let mut band = BandMatrix::zeros(m * n, w, w);
    let diff = 1.0 / (h * h);
    let adv = 1.0 / (2.0 * h);
    for i in 0..m {
        for r in 0..n {
            let row = i * n + r;
            band.add(row, row, -2.0 * diff);
            if i > 0 {
                band.add(row, row - n, diff);
                for c in 0..n {
                    band.add(row, (i - 1) * n + c, adv * coefficients[(i - 1) * n * n + r * n + c]);
                }
            }
            if i + 1 < m {
                band.add(row, row + n, diff);
                for c in 0..n {
                    band.add(row, (i + 1) * n + c, -adv * coefficients[(i + 1) * n * n + r * n + c]);
                }
            }
        }
    }
    band
}

/// Assembles `L(ε)` about `profile`. Jacobians are evaluated at the nodes;
/// `A±` are recorded for the far field.
pub fn assemble_linearized(profile: &ShockProfile, flux: &dyn Flux) -> Result<DiscreteLinearOperator> {
    let grid = profile.grid();
    let n = profile.dim();
    if flux.dim() != n {
        return Err(Error::Dimension(format!("flux has {} components, profile {n}", flux.dim())));
    }
    let eps = profile.eps;
    let mut coefficients = Vec::with_capacity(grid.len() * n * n);
    for i in 0..grid.len() {
        let a = flux.jacobian(eps, profile.state(i));
        for r in 0..n {
            for c in 0..n {
                coefficients.push(a[(r, c)]);
            }
        }
    }
    let band = assemble_band(grid, n, &coefficients);
    let mut op = DiscreteLinearOperator {
        grid,
        n,
        eps,
        closure: Closure::Dirichlet,
        band,
        coefficients,
        a_minus: flux.jacobian(eps, &profile.u_minus),
        a_plus: flux.jacobian(eps, &profile.u_plus),
        profile: profile.clone(),
        zero: None,
        planted: None,
    };
    let jump: f64 = profile.u_minus.iter().zip(&profile.u_plus).map(|(a, b)| (a - b).abs()).sum();
    if jump > 0.0 {
        op.zero = Some(op.compute_zero_mode()?);
    }
    Ok(op)
}

/// Constant left vector orthogonal to `S(A₋) ∪ U(A₊)`, scaled so that
/// `ℓ·(u₊ − u₋) = 1`.
pub fn left_zero_vector(a_minus: &DMatrix<f64>, a_plus: &DMatrix<f64>, u_minus: &[f64], u_plus: &[f64]) -> Result<Vec<f64>> {
    let n = a_minus.nrows();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lam, v) in real_eigensystem(a_minus)? {
        if lam < 0.0 {
            rows.push(v);
        }
    }
    for (lam, v) in real_eigensystem(a_plus)? {
        if lam > 0.0 {
            rows.push(v);
        }
    }
    if rows.len() != n - 1 {
        return Err(Error::SpectralAssumption(format!(
            "dim S(A-) + dim U(A+) = {} but a Lax shock needs {}",
            rows.len(),
            n - 1
        )));
    }
    let mut ell = if rows.is_empty() {
        vec![1.0; n]
    } else {
        let m = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        null_vector(&(m.transpose() * m), 0.0)
    };
    let d: f64 = ell.iter().zip(u_plus.iter().zip(u_minus)).map(|(l, (p, q))| l * (p - q)).sum();
    if d.abs() < 1e-10 {
        return Err(Error::SpectralAssumption("ℓ·(u+ − u−) vanishes".into()));
    }
    ell.iter_mut().for_each(|v| *v /= d);
    Ok(ell)
}

impl DiscreteLinearOperator {
    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn components(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.grid.len() * self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn closure(&self) -> Closure {
        self.closure
    }

    pub fn band(&self) -> &BandMatrix<f64> {
        &self.band
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn far_field(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.a_minus, &self.a_plus)
    }

    pub fn profile(&self) -> &ShockProfile {
        &self.profile
    }

    pub fn zero_mode(&self) -> Option<&ZeroMode> {
        self.zero.as_ref()
    }

    pub fn planted(&self) -> Option<&PlantedModes> {
        self.planted.as_ref()
    }

    /// Replaces the planted term. The modes must come from this operator's
    /// unplanted part.
    pub fn with_planted(mut self, modes: PlantedModes) -> Result<Self> {
        if modes.v.iter().chain(&modes.w).chain(&modes.r).any(|c| c.len() != self.dim()) {
            return Err(Error::Dimension("planted modes do not match the operator size".into()));
        }
        self.planted = Some(modes);
        Ok(self)
    }

    pub fn without_planted(&self) -> Self {
        Self { planted: None, ..self.clone() }
    }

    fn apply_generic<T: Scalar>(&self, band: &BandMatrix<f64>, x: &[T], transpose: bool) -> Vec<T> {
        let mut out = vec![T::zero(); x.len()];
        for i in 0..band.dim() {
            for j in band.row_range(i) {
                let a = band.get(i, j);
                if transpose {
                    out[j] += x[i] * a;
                } else {
                    out[i] += x[j] * a;
                }
            }
        }
        if let Some(p) = &self.planted {
            let (left, right) = if transpose { (&p.r, &p.w) } else { (&p.w, &p.r) };
            for (l, r) in left.iter().zip(right) {
                let s = x.iter().zip(l).fold(T::zero(), |acc, (a, b)| acc + *a * *b);
                for (o, rv) in out.iter_mut().zip(r) {
                    *o += s * *rv;
                }
            }
        }
        out
    }

    /// `Lx`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_generic(&self.band, x, false)
    }

    pub fn apply_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.apply_generic(&self.band, x, false)
    }

    /// `Lᵀx`.
    pub fn apply_transpose_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.apply_generic(&self.band, x, true)
    }

    pub fn apply_fn(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        GridFunction::new(self.grid, self.n, self.apply(&f.values))
    }

    pub fn check<T: Scalar>(&self, f: &GridFunction<T>) -> Result<()> {
        if f.grid != self.grid || f.n_comp != self.n {
            return Err(Error::Dimension("grid function does not live on the operator grid".into()));
        }
        Ok(())
    }

    fn low_rank<T: Scalar>(&self, scale: T, transpose: bool) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        match &self.planted {
            None => (vec![], vec![]),
            Some(p) => {
                let (u, v) = if transpose { (&p.w, &p.r) } else { (&p.r, &p.w) };
                let u = u.iter().map(|c| c.iter().map(|x| T::from_real(*x) * scale).collect()).collect();
                let v = v.iter().map(|c| c.iter().map(|x| T::from_real(*x)).collect()).collect();
                (u, v)
            }
        }
    }

    /// Solver for `(L − σ)x = b`, or `(Lᵀ − σ)x = b` when `transpose`.
    pub fn shifted_solver(&self, sigma: Complex64, transpose: bool) -> Result<LowRankSolver<Complex64>> {
        let b = if transpose { self.band.transpose() } else { self.band.clone() };
        let b = b.map(|v| Complex64::new(v, 0.0)).scaled_shift(Complex64::new(1.0, 0.0), -sigma);
        let (u, v) = self.low_rank(Complex64::new(1.0, 0.0), transpose);
        LowRankSolver::new(&b, u, v)
    }

    /// Solver for `(L − σ + Σ_k u_k v_kᵀ)x = b`, e.g. to border `L` at a
    /// simple zero eigenvalue.
    pub fn bordered_solver(&self, sigma: f64, u: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Result<LowRankSolver<f64>> {
        let b = self.band.scaled_shift(1.0, -sigma);
        let (mut pu, mut pv) = self.low_rank(1.0, false);
        pu.extend(u);
        pv.extend(v);
        LowRankSolver::new(&b, pu, pv)
    }

    /// Solver for `(I − θL)x = b`.
    pub fn implicit_solver(&self, theta: f64) -> Result<LowRankSolver<f64>> {
        let b = self.band.scaled_shift(-theta, 1.0);
        let (u, v) = self.low_rank(-theta, false);
        LowRankSolver::new(&b, u, v)
    }

    /// Full matrix, for cross-checks on small grids.
    pub fn dense(&self) -> DMatrix<f64> {
        let m = self.dim();
        let mut d = DMatrix::from_fn(m, m, |i, j| self.band.get(i, j));
        if let Some(p) = &self.planted {
            for (w, r) in p.w.iter().zip(&p.r) {
                for i in 0..m {
                    for j in 0..m {
                        d[(i, j)] += r[i] * w[j];
                    }
                }
            }
        }
        d
    }

    /// `h·Σ_i f_i` per component.
    pub fn mass<T: Scalar>(&self, f: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for (k, v) in f.iter().enumerate() {
            out[k % self.n] += *v;
        }
        out.iter().map(|v| *v * self.grid.h()).collect()
    }

    /// `‖Lψ₀‖_{L²}` for the discrete translational mode.
    pub fn zero_mode_residual(&self) -> Result<f64> {
        let z = self.zero.as_ref().ok_or_else(|| Error::SpectralAssumption("constant profile has no zero mode".into()))?;
        let r = self.apply(&z.mode.values);
        Ok(crate::spaces::l2(&GridFunction::new(self.grid, self.n, r)?.pointwise_modulus(), &self.grid))
    }

    fn compute_zero_mode(&self) -> Result<ZeroMode> {
        let ell = left_zero_vector(&self.a_minus, &self.a_plus, &self.profile.u_minus, &self.profile.u_plus)?;
        let lu = match self.band.factor() {
            Ok(lu) => lu,
            Err(_) => self.band.scaled_shift(1.0, -1e-12).factor()?,
        };
        let mut v = self.profile.derivative.values.clone();
        for _ in 0..3 {
            let w = lu.solve(&v);
            let s = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !s.is_finite() || s == 0.0 {
                return Err(Error::Numerical("zero-mode inverse iteration broke down".into()));
            }
            v = w.iter().map(|x| x / s).collect();
        }
        let lv = self.band.matvec(&v);
        let eigenvalue = dotu(&v, &lv) / dotu(&v, &v);
        let pair: f64 = self.mass(&v).iter().zip(&ell).map(|(m, l)| m * l).sum();
        if pair.abs() < 1e-12 {
            return Err(Error::SpectralAssumption("zero mode is orthogonal to ℓ".into()));
        }
        let mode = GridFunction::new(self.grid, self.n, v.iter().map(|x| x / pair).collect())?;
        Ok(ZeroMode { mode, eigenvalue, ell })
    }
}
