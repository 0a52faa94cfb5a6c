use super::field::{half_modes, xi_norm_sq, CylinderField};
use crate::error::{Error, Result};
use crate::linops::{assemble_linearized, pair_from_vector, projections, CrossingDesign, DiscreteLinearOperator, Projectors, Semigroup};
use crate::numerics::arnoldi::inverse_iteration;
use crate::numerics::band::{BandMatrix, LowRankSolver};
use crate::numerics::fit::fit_line;
use crate::numerics::norm2;
use crate::profiles::{real_eigensystem, Flux, FluxFamily, ShockProfile};
use crate::resummation::{apply_right_inverse, derivative, RightInverseOptions, SeriesLedger};
use crate::spaces::{weighted_sup, Grid1D, GridFunction};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `s·F(ε,u)`, a transverse flux sharing the characteristic directions of `F`.
#[derive(Clone, Debug)]
pub struct ScaledFlux {
    pub base: FluxFamily,
    pub scale: f64,
}

impl Flux for ScaledFlux {
    fn name(&self) -> String {
        format!("{}*{}", self.scale, self.base.name())
    }
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn flux(&self, eps: f64, u: &[f64]) -> Vec<f64> {
        self.base.flux(eps, u).into_iter().map(|v| self.scale * v).collect()
    }
    fn jacobian(&self, eps: f64, u: &[f64]) -> DMatrix<f64> {
        self.base.jacobian(eps, u) * self.scale
    }
    fn endstates(&self, eps: f64) -> (Vec<f64>, Vec<f64>) {
        self.base.endstates(eps)
    }
    fn eps_range(&self) -> (f64, f64) {
        self.base.eps_range()
    }
}

/// `{F¹, ½F¹, ¼F¹}` truncated to `q + 1` directions.
pub fn transverse_flux_set(base: FluxFamily, transverse_dim: usize) -> Vec<FluxFamily> {
    let mut out = vec![base.clone()];
    for j in 0..transverse_dim {
        out.push(Arc::new(ScaledFlux { base: base.clone(), scale: 0.5f64.powi(j as i32 + 1) }));
    }
    out
}

/// `L_ξ = L₀ − iΣ_jξ_jA^{j+1}(x₁) − |ξ|²` on one transverse mode, as a
/// complex band plus a low-rank term. The `ξ = 0` member keeps the real
/// operator it was built from.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    xi: Vec<i32>,
    grid: Grid1D,
    n: usize,
    band: BandMatrix<Complex64>,
    /// Pairs `(u, v)` of the low-rank term `Σ u vᵀ`.
    low_rank: Vec<(Vec<Complex64>, Vec<Complex64>)>,
    real: Option<DiscreteLinearOperator>,
}

impl ModeOperator {
    fn from_real(op: DiscreteLinearOperator, q: usize) -> Self {
        let low_rank = op
            .planted()
            .map(|p| p.r.iter().zip(&p.w).map(|(r, w)| (complexify(r), complexify(w))).collect())
            .unwrap_or_default();
        Self {
            xi: vec![0; q],
            grid: op.grid(),
            n: op.components(),
            band: op.band().map(|v| Complex64::new(v, 0.0)),
            low_rank,
            real: Some(op),
        }
    }

    pub fn xi(&self) -> &[i32] {
        &self.xi
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn components(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.grid.len() * self.n
    }

    pub fn band(&self) -> &BandMatrix<Complex64> {
        &self.band
    }

    /// The real operator behind the `ξ = 0` member.
    pub fn real(&self) -> Option<&DiscreteLinearOperator> {
        self.real.as_ref()
    }

    /// `L_{−ξ} = conj(L_ξ)`.
    pub fn conj(&self) -> Self {
        Self {
            xi: self.xi.iter().map(|k| -k).collect(),
            grid: self.grid,
            n: self.n,
            band: self.band.map(|z| z.conj()),
            low_rank: self.low_rank.iter().map(|(u, v)| (conjugate(u), conjugate(v))).collect(),
            real: self.real.clone(),
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.band.matvec(x);
        for (u, v) in &self.low_rank {
            let s: Complex64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
            out.iter_mut().zip(u).for_each(|(o, uv)| *o += s * uv);
        }
        out
    }

    fn solver(&self, band: BandMatrix<Complex64>, scale: Complex64, transpose: bool) -> Result<LowRankSolver<Complex64>> {
        let (u, v): (Vec<_>, Vec<_>) = self
            .low_rank
            .iter()
            .map(|(u, v)| if transpose { (v.clone(), u.clone()) } else { (u.clone(), v.clone()) })
            .map(|(u, v)| (u.into_iter().map(|z| z * scale).collect::<Vec<_>>(), v))
            .unzip();
        LowRankSolver::new(&band, u, v)
    }

    /// Solver for `(L_ξ − σ)x = b`, or the transpose.
    pub fn shifted_solver(&self, sigma: Complex64, transpose: bool) -> Result<LowRankSolver<Complex64>> {
        let b = if transpose { self.band.transpose() } else { self.band.clone() };
        self.solver(b.scaled_shift(Complex64::new(1.0, 0.0), -sigma), Complex64::new(1.0, 0.0), transpose)
    }

    /// Solver for `(I − θL_ξ)x = b`.
    pub fn implicit_solver(&self, theta: f64) -> Result<LowRankSolver<Complex64>> {
        let t = Complex64::new(-theta, 0.0);
        self.solver(self.band.scaled_shift(t, Complex64::new(1.0, 0.0)), t, false)
    }

    /// Full matrix, for small grids.
    pub fn dense(&self) -> DMatrix<Complex64> {
        let m = self.dim();
        let mut d = DMatrix::from_fn(m, m, |i, j| self.band.get(i, j));
        for (u, v) in &self.low_rank {
            for i in 0..m {
                for j in 0..m {
                    d[(i, j)] += u[i] * v[j];
                }
            }
        }
        d
    }

    /// All eigenvalues by a dense Schur decomposition, rightmost first.
    pub fn dense_spectrum(&self) -> Result<Vec<Complex64>> {
        let mut ev: Vec<Complex64> = self
            .dense()
            .schur()
            .eigenvalues()
            .ok_or_else(|| Error::Numerical("Schur decomposition failed".into()))?
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.re.total_cmp(&a.re));
        Ok(ev)
    }
}

fn complexify(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|x| Complex64::new(*x, 0.0)).collect()
}

fn conjugate(v: &[Complex64]) -> Vec<Complex64> {
    v.iter().map(|z| z.conj()).collect()
}

/// Crank–Nicolson steps of one mode operator.
#[derive(Clone, Debug)]
pub struct ModeStepper {
    op: ModeOperator,
    dt: f64,
    solver: LowRankSolver<Complex64>,
}

impl ModeStepper {
    pub fn new(op: ModeOperator, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Argument(format!("time step {dt} must be positive")));
        }
        let solver = op.implicit_solver(0.5 * dt)?;
        Ok(Self { op, dt, solver })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `(I − Δt/2 L)⁻¹((I + Δt/2 L)v + Δt s)`.
    pub fn step(&self, v: &[Complex64], source: Option<&[Complex64]>) -> Vec<Complex64> {
        let lv = self.op.apply(v);
        let half = 0.5 * self.dt;
        let mut rhs: Vec<Complex64> = v.iter().zip(&lv).map(|(a, b)| a + b * half).collect();
        if let Some(s) = source {
            rhs.iter_mut().zip(s).for_each(|(r, x)| *r += x * self.dt);
        }
        self.solver.solve(&rhs)
    }
}

/// The crossing pair planted at mode `ξ*`: `L_{ξ*}φ = λφ`,
/// `L_{ξ*}ᵀφ̃ = λφ̃`, `h·Σφ̃φ = 1`. At `ξ* = 0` the real operator carries
/// the pair `λ, λ̄` and `projectors` holds its projections.
#[derive(Clone, Debug)]
pub struct ModeCrossing {
    pub xi: Vec<i32>,
    pub lambda: Complex64,
    pub phi: Vec<Complex64>,
    pub phi_tilde: Vec<Complex64>,
    pub projectors: Option<Projectors>,
}

impl ModeCrossing {
    /// `⟨φ̃, f⟩ = h·Σφ̃f`.
    pub fn coefficient(&self, f: &[Complex64], h: f64) -> Complex64 {
        self.phi_tilde.iter().zip(f).map(|(a, b)| a * b).sum::<Complex64>() * h
    }

    /// Removes the pair from data on mode `ξ` (`±ξ*`).
    fn project(&self, xi: &[i32], f: &[Complex64], h: f64) -> Vec<Complex64> {
        let minus: Vec<i32> = self.xi.iter().map(|k| -k).collect();
        if xi.iter().all(|k| *k == 0) && self.xi.iter().all(|k| *k == 0) {
            let c1 = self.coefficient(f, h);
            let c2 = self.phi_tilde.iter().zip(f).map(|(a, b)| a.conj() * b).sum::<Complex64>() * h;
            return f.iter().zip(&self.phi).map(|(v, p)| v - p * c1 - p.conj() * c2).collect();
        }
        if xi == self.xi.as_slice() {
            let c = self.coefficient(f, h);
            f.iter().zip(&self.phi).map(|(v, p)| v - p * c).collect()
        } else if xi == minus.as_slice() {
            let c = self.phi_tilde.iter().zip(f).map(|(a, b)| a.conj() * b).sum::<Complex64>() * h;
            f.iter().zip(&self.phi).map(|(v, p)| v - p.conj() * c).collect()
        } else {
            f.to_vec()
        }
    }
}

/// Transverse Fourier modes of the linearization about a planar profile on
/// `ℝ × T^q`, `T = ℝ/2πℤ`, for `|ξ|_∞ ≤ ξ_max`. Operators are stored on the
/// half set `ξ = 0` or first nonzero `ξ_j > 0`; `L_{−ξ} = conj(L_ξ)`.
#[derive(Clone, Debug)]
pub struct TransverseModeFamily {
    pub transverse_dim: usize,
    pub xi_max: usize,
    pub eps: f64,
    /// `ℜσ_ess(L_ξ) ≤ −η|ξ|²` for `ξ ≠ 0`, read off the constant-coefficient
    /// symbols at `x₁ → ±∞`.
    pub eta: f64,
    profile: ShockProfile,
    flux_set: Vec<FluxFamily>,
    modes: Vec<Vec<i32>>,
    operators: Vec<ModeOperator>,
    crossing: Option<ModeCrossing>,
}

/// Whether `b` is diagonalizable with real eigenvalues.
pub fn is_real_semisimple(b: &DMatrix<f64>) -> bool {
    let Ok(eig) = real_eigensystem(b) else { return false };
    let n = b.nrows();
    let scale = b.norm().max(1.0);
    let mut i = 0;
    while i < eig.len() {
        let mut j = i + 1;
        while j < eig.len() && (eig[j].0 - eig[i].0).abs() <= 1e-8 * scale {
            j += 1;
        }
        let mult = j - i;
        if mult > 1 {
            let m = b - DMatrix::identity(n, n) * eig[i].0;
            let rank = m.svd(false, false).singular_values.iter().filter(|s| **s > 1e-9 * scale).count();
            if rank != n - mult {
                return false;
            }
        }
        i = j;
    }
    true
}

/// Assembles `L_ξ` about `profile` for the flux set `{F¹, …, F^{q+1}}`,
/// `F¹` along `x₁`. Requires `ζA¹_± + Σξ_jA^{j+1}_±` real semisimple for all
/// directions, checked on a sample of `(ζ, ξ)`.
pub fn assemble_mode_family(profile: &ShockProfile, flux_set: &[FluxFamily], xi_max: usize) -> Result<TransverseModeFamily> {
    let q = flux_set.len().saturating_sub(1);
    if !(1..=2).contains(&q) {
        return Err(Error::Configuration(format!("need 2 or 3 fluxes for a torus cross-section of dimension 1 or 2, got {}", flux_set.len())));
    }
    let n = profile.dim();
    if flux_set.iter().any(|f| f.dim() != n) {
        return Err(Error::Dimension("fluxes differ in component count".into()));
    }
    let eps = profile.eps;
    let base = assemble_linearized(profile, flux_set[0].as_ref())?;

    let mut eta = f64::INFINITY;
    let directions = super::field::full_modes(q, 2);
    for u in [&profile.u_minus, &profile.u_plus] {
        let jac: Vec<DMatrix<f64>> = flux_set.iter().map(|f| f.jacobian(eps, u)).collect();
        for zeta in (-8..=8).map(|k| 0.5 * k as f64) {
            for xi in &directions {
                let mut b = &jac[0] * zeta;
                for (j, k) in xi.iter().enumerate() {
                    b += &jac[j + 1] * (*k as f64);
                }
                if !is_real_semisimple(&b) {
                    return Err(Error::SpectralAssumption(format!(
                        "ζA¹ + Σξ_jA^(j+1) is not real semisimple at ζ = {zeta}, ξ = {xi:?}"
                    )));
                }
                let x2 = xi_norm_sq(xi);
                if x2 > 0.0 {
                    // symbol −i·a − ζ² − |ξ|² with a real
                    eta = eta.min((zeta * zeta + x2) / x2);
                }
            }
        }
    }

    let grid = profile.grid();
    let m = grid.len();
    let transverse: Vec<Vec<f64>> = flux_set[1..]
        .iter()
        .map(|f| {
            let mut c = Vec::with_capacity(m * n * n);
            for i in 0..m {
                let a = f.jacobian(eps, profile.state(i));
                for r in 0..n {
                    for s in 0..n {
                        c.push(a[(r, s)]);
                    }
                }
            }
            c
        })
        .collect();

    let modes = half_modes(q, xi_max);
    let operators: Vec<ModeOperator> = modes
        .par_iter()
        .map(|xi| {
            if xi.iter().all(|k| *k == 0) {
                return ModeOperator::from_real(base.clone(), q);
            }
            let mut band = base.band().map(|v| Complex64::new(v, 0.0));
            let x2 = xi_norm_sq(xi);
            for i in 0..m {
                for r in 0..n {
                    let row = i * n + r;
                    band.add(row, row, Complex64::new(-x2, 0.0));
                    for s in 0..n {
                        let a: f64 = xi.iter().zip(&transverse).map(|(k, c)| *k as f64 * c[i * n * n + r * n + s]).sum();
                        if a != 0.0 {
                            band.add(row, i * n + s, Complex64::new(0.0, -a));
                        }
                    }
                }
            }
            ModeOperator { xi: xi.clone(), grid, n, band, low_rank: Vec::new(), real: None }
        })
        .collect();

    Ok(TransverseModeFamily {
        transverse_dim: q,
        xi_max,
        eps,
        eta,
        profile: profile.clone(),
        flux_set: flux_set.to_vec(),
        modes,
        operators,
        crossing: None,
    })
}

impl TransverseModeFamily {
    pub fn profile(&self) -> &ShockProfile {
        &self.profile
    }

    pub fn flux_set(&self) -> &[FluxFamily] {
        &self.flux_set
    }

    pub fn grid(&self) -> Grid1D {
        self.profile.grid()
    }

    pub fn components(&self) -> usize {
        self.profile.dim()
    }

    /// The half set of modes, in storage order.
    pub fn modes(&self) -> &[Vec<i32>] {
        &self.modes
    }

    pub fn operators(&self) -> &[ModeOperator] {
        &self.operators
    }

    pub fn crossing(&self) -> Option<&ModeCrossing> {
        self.crossing.as_ref()
    }

    /// `L_ξ` for any `ξ` in the cutoff box.
    pub fn operator(&self, xi: &[i32]) -> Result<ModeOperator> {
        if xi.len() != self.transverse_dim || xi.iter().any(|k| k.unsigned_abs() as usize > self.xi_max) {
            return Err(Error::Argument(format!("mode {xi:?} outside the cutoff {}", self.xi_max)));
        }
        if let Some(k) = self.modes.iter().position(|m| m.as_slice() == xi) {
            return Ok(self.operators[k].clone());
        }
        let minus: Vec<i32> = xi.iter().map(|k| -k).collect();
        let k = self.modes.iter().position(|m| *m == minus).expect("every mode or its negative is in the half set");
        Ok(self.operators[k].conj())
    }

    /// Plants the pair `γ(ε) ± iτ(ε)` of `design` at mode `ξ*` (half set).
    /// At `ξ* = 0` this is the planar plant on `L₀`; otherwise `L_{ξ*}`
    /// gains the rank-one term `r wᵀ`, `r = λφ − L_{ξ*}φ`,
    /// `w = φ̄/Σ|φ|²`, with `φ = V₀ + iV₁` from the design's bump modes.
    pub fn with_crossing(mut self, xi_star: &[i32], design: &CrossingDesign) -> Result<Self> {
        let k = self
            .modes
            .iter()
            .position(|m| m.as_slice() == xi_star)
            .ok_or_else(|| Error::Argument(format!("crossing mode {xi_star:?} is not in the half set up to {}", self.xi_max)))?;
        let (grid, n, eps) = (self.grid(), self.components(), self.eps);
        let h = grid.h();
        let lambda = Complex64::new(design.gamma(eps), design.tau(eps));
        let v = design.modes(grid, n, 2);
        let phi0: Vec<Complex64> = v[0].iter().zip(&v[1]).map(|(a, b)| Complex64::new(*a, *b)).collect();
        if k == 0 {
            let real = self.operators[0].real.as_ref().expect("the zero mode keeps its real operator");
            let op = design.plant(real)?;
            let pair = pair_from_vector(&op, lambda, phi0, Vec::new())?;
            let projectors = projections(&pair, &op)?;
            self.crossing = Some(ModeCrossing {
                xi: xi_star.to_vec(),
                lambda,
                phi: projectors.phi().to_vec(),
                phi_tilde: projectors.phi_tilde().to_vec(),
                projectors: Some(projectors),
            });
            self.operators[0] = ModeOperator::from_real(op, self.transverse_dim);
            return Ok(self);
        }
        let op = &mut self.operators[k];
        op.low_rank.clear();
        let lphi = op.apply(&phi0);
        let r: Vec<Complex64> = phi0.iter().zip(&lphi).map(|(p, l)| lambda * p - l).collect();
        let s = phi0.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let w: Vec<Complex64> = phi0.iter().map(|z| z.conj() / s).collect();
        op.low_rank.push((r, w));

        let scale = (h * phi0.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
        let phi: Vec<Complex64> = phi0.iter().map(|z| z / scale).collect();
        let tsolver = op.shifted_solver(lambda, true)?;
        let start: Vec<Complex64> = phi.iter().map(|z| z.conj()).collect();
        let mut left = inverse_iteration(|x| tsolver.solve(x), &start, 3);
        let d = left.iter().zip(&phi).map(|(a, b)| a * b).sum::<Complex64>() * h;
        if d.norm() < 1e-10 * norm2(&left) * norm2(&phi) * h {
            return Err(Error::Numerical("left and right eigenfunctions are nearly orthogonal".into()));
        }
        left.iter_mut().for_each(|z| *z /= d);
        self.crossing = Some(ModeCrossing { xi: xi_star.to_vec(), lambda, phi, phi_tilde: left, projectors: None });
        Ok(self)
    }

    /// Removes the crossing pair from data on mode `ξ`.
    pub fn project(&self, xi: &[i32], f: &[Complex64]) -> Vec<Complex64> {
        match &self.crossing {
            Some(c) => c.project(xi, f, self.grid().h()),
            None => f.to_vec(),
        }
    }
}

fn strong_complex(f: &[Complex64], grid: &Grid1D, n: usize) -> f64 {
    let modulus: Vec<f64> = f.chunks(n).map(|z| z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).collect();
    weighted_sup(&modulus, grid, 1)
}

/// Decay of `‖(1+|x₁|)e^{L_ξt}f‖_∞` on one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapDecay {
    pub xi: Vec<i32>,
    /// Minus the fitted slope of the log norm over the window.
    pub rate: f64,
    /// `η|ξ|²`.
    pub envelope: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

impl GapDecay {
    /// `rate/(η|ξ|²)`.
    pub fn ratio(&self) -> f64 {
        self.rate / self.envelope
    }
}

/// Fits the decay rate of `e^{L_ξt}f` over `t ∈ [t0, t1]` with the crossing
/// pair removed from `f`, stepping Crank–Nicolson at `Δt = 0.01`.
pub fn gap_decay(family: &TransverseModeFamily, xi: &[i32], f: &[Complex64], t_range: (f64, f64)) -> Result<GapDecay> {
    let (t0, t1) = t_range;
    if !(t0 >= 0.0 && t1 > t0) {
        return Err(Error::Argument(format!("invalid time window [{t0}, {t1}]")));
    }
    let op = family.operator(xi)?;
    if f.len() != op.dim() {
        return Err(Error::Dimension("data does not match the mode operator".into()));
    }
    let (grid, n) = (family.grid(), family.components());
    let dt = 0.01;
    let stepper = ModeStepper::new(op, dt)?;
    let every = 10;
    let steps = (t1 / dt).round() as usize;
    let mut u = family.project(xi, f);
    let (mut times, mut norms) = (vec![0.0], vec![strong_complex(&u, &grid, n)]);
    for k in 1..=steps {
        u = stepper.step(&u, None);
        if k % every == 0 {
            times.push(k as f64 * dt);
            norms.push(strong_complex(&u, &grid, n));
        }
    }
    if norms.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Numerical("mode evolution lost the data".into()));
    }
    let (tw, lw): (Vec<f64>, Vec<f64>) =
        times.iter().zip(&norms).filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12).map(|(t, v)| (*t, v.ln())).unzip();
    let fit = fit_line(&tw, &lw)?;
    Ok(GapDecay { xi: xi.to_vec(), rate: -fit.slope, envelope: family.eta * xi_norm_sq(xi), times, norms })
}

/// Per-mode record of the right inverse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeLedger {
    pub xi: Vec<i32>,
    /// `‖S_ξ^j y_ξ‖_{X1}` for the terms summed.
    pub term_norms: Vec<f64>,
    /// Last ratio of successive term norms.
    pub contraction: f64,
    /// `‖b_ξ‖_{X1}`.
    pub result_norm: f64,
    /// The resummation ledger of the `ξ = 0` mode.
    pub series: Option<SeriesLedger>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderInverse {
    pub field: CylinderField,
    pub ledgers: Vec<ModeLedger>,
    /// `Σ_{ξ≠0}‖b_ξ‖_{X1} / sup_ξ‖(1+|x₁|)n_ξ‖_∞`.
    pub transverse_constant: f64,
}

fn complex_derivative(f: &[Complex64], grid: Grid1D, n: usize) -> Result<Vec<Complex64>> {
    let re = derivative(&GridFunction::new(grid, n, f.iter().map(|z| z.re).collect())?);
    let im = derivative(&GridFunction::new(grid, n, f.iter().map(|z| z.im).collect())?);
    Ok(re.values.iter().zip(&im.values).map(|(a, b)| Complex64::new(*a, *b)).collect())
}

/// Substeps per period used by the mode-wise right inverse.
pub fn inverse_substeps(t: f64) -> usize {
    ((t / 0.05).ceil() as usize).max(1)
}

/// `b = Σ_j S^j ∂_{x₁}n` mode by mode with `S = e^{L_ξT}`: the `ξ = 0` mode
/// by the resummed series of the one-dimensional right inverse, the others
/// by their geometric series, summed until a term's `X1` norm drops below
/// `tol`.
pub fn multid_right_inverse(family: &TransverseModeFamily, n_density: &CylinderField, t: f64, tol: f64) -> Result<CylinderInverse> {
    let (grid, n) = (family.grid(), family.components());
    if n_density.grid != grid || n_density.n_comp != n || n_density.transverse_dim != family.transverse_dim {
        return Err(Error::Dimension("density does not live on the family's grid".into()));
    }
    if n_density.xi_max > family.xi_max {
        return Err(Error::Dimension("density carries modes beyond the family cutoff".into()));
    }
    if !(t > 0.0) || !(tol > 0.0) {
        return Err(Error::Argument(format!("need T > 0 and tol > 0, got {t}, {tol}")));
    }
    let substeps = inverse_substeps(t);
    let mut targets: Vec<usize> = (0..n_density.modes.len()).collect();
    if n_density.hermitian {
        targets.retain(|k| {
            let xi = &n_density.modes[*k];
            xi.iter().find(|v| **v != 0).is_none_or(|v| *v > 0)
        });
    }
    let results: Vec<(usize, Vec<Complex64>, ModeLedger)> = targets
        .par_iter()
        .map(|&k| {
            let xi = n_density.modes[k].clone();
            let data = &n_density.coefficients[k];
            if data.iter().all(|z| *z == ZERO) {
                let ledger = ModeLedger { xi, term_norms: vec![], contraction: 0.0, result_norm: 0.0, series: None };
                return Ok((k, data.clone(), ledger));
            }
            if xi.iter().all(|v| *v == 0) {
                if data.iter().any(|z| z.im.abs() > 1e-14 * z.norm().max(1.0)) {
                    return Err(Error::Argument("the ξ = 0 coefficient of a density must be real".into()));
                }
                let real = family.operators[0].real.clone().expect("the zero mode keeps its real operator");
                let projector = family.crossing.as_ref().and_then(|c| c.projectors.clone());
                let sg = Semigroup::new(real, t, substeps, projector)?;
                let f = GridFunction::new(grid, n, data.iter().map(|z| z.re).collect())?;
                let (b, series) = apply_right_inverse(&sg, &f, &RightInverseOptions { tol, ..Default::default() })?;
                let values = complexify(&b.values);
                let ledger = ModeLedger {
                    xi,
                    term_norms: series.records.iter().map(|r| r.increment_norm).collect(),
                    contraction: 1.0,
                    result_norm: strong_complex(&values, &grid, n),
                    series: Some(series),
                };
                return Ok((k, values, ledger));
            }
            let stepper = ModeStepper::new(family.operator(&xi)?, t / substeps as f64)?;
            let period = |v: &[Complex64]| (0..substeps).fold(v.to_vec(), |u, _| stepper.step(&u, None));
            let mut term = family.project(&xi, &complex_derivative(data, grid, n)?);
            let mut sum = vec![ZERO; term.len()];
            let mut norms = Vec::new();
            for _ in 0..10_000 {
                let size = strong_complex(&term, &grid, n);
                norms.push(size);
                sum.iter_mut().zip(&term).for_each(|(s, x)| *s += x);
                if size < tol {
                    break;
                }
                term = period(&term);
                if norms.len() >= 3 && size > norms[norms.len() - 2] {
                    return Err(Error::NonConvergence(format!("mode {xi:?} series does not contract")));
                }
            }
            let last = norms.len();
            let contraction = if last >= 2 && norms[last - 2] > 0.0 { norms[last - 1] / norms[last - 2] } else { 0.0 };
            let sum = family.project(&xi, &sum);
            let ledger = ModeLedger { xi, term_norms: norms, contraction, result_norm: strong_complex(&sum, &grid, n), series: None };
            Ok((k, sum, ledger))
        })
        .collect::<Result<_>>()?;

    let mut field = CylinderField::zeros(grid, n, n_density.transverse_dim, n_density.xi_max, n_density.hermitian);
    let mut ledgers = Vec::new();
    for (k, values, ledger) in results {
        let xi = n_density.modes[k].clone();
        field.set_mode(&xi, values)?;
        ledgers.push(ledger);
    }
    let input_sup = (0..n_density.modes.len()).map(|k| n_density.mode_strong(k)).fold(0.0, f64::max);
    let mut transverse_sum = 0.0;
    for (k, xi) in field.modes.iter().enumerate() {
        if xi.iter().any(|v| *v != 0) {
            transverse_sum += field.mode_strong(k);
        }
    }
    let transverse_constant = if input_sup > 0.0 { transverse_sum / input_sup } else { 0.0 };
    Ok(CylinderInverse { field, ledgers, transverse_constant })
}
