use super::{truncation_psi, LinearStepper, PerturbationModel};
use crate::error::{Error, Result};
use crate::linops::{
    assemble_linearized, pair_from_vector, projections, CrossingDesign, DiscreteLinearOperator, Projectors, Semigroup, SpectralPair,
};
use crate::numerics::arnoldi::inverse_iteration;
use crate::numerics::band::LowRankSolver;
use crate::profiles::{solve_profile, FluxFamily, ShockProfile};
use crate::spaces::{weighted_sup, Grid1D, GridFunction};
use num_complex::Complex64;
use std::f64::consts::PI;

/// The perturbation equation `u_t = Lu + D Q(ε,u)` about a profile `ū`, with
/// `Q(ε,u) = −F(ū+u) + F(ū) + F_u(ū)u` and `D` the conservative central
/// difference `(q_{i+1} − q_{i−1})/2h` under zero ghosts, together with the
/// crossing pair, its projectors and the discrete translational mode.
#[derive(Clone, Debug)]
pub struct PerturbationSystem {
    pub flux: FluxFamily,
    pub eps: f64,
    pub op: DiscreteLinearOperator,
    pub pair: SpectralPair,
    pub projectors: Projectors,
    base_flux: Vec<f64>,
    neutral: NeutralMode,
}

/// `ψ₀` and the left null vector `ℓ_d` of a discrete `L`, scaled so that
/// `h·Σ ℓ_d·ψ₀ = 1`, with a solver for `L + ψ₀(hℓ_d)ᵀ`, which is
/// invertible on the complement of `ψ₀`.
#[derive(Clone, Debug)]
pub(crate) struct NeutralMode {
    h: f64,
    zero_mode: Vec<f64>,
    left_null: Vec<f64>,
    bordered: LowRankSolver<f64>,
}

impl NeutralMode {
    pub(crate) fn new(op: &DiscreteLinearOperator) -> Result<Self> {
        let n = op.components();
        let z = op
            .zero_mode()
            .ok_or_else(|| Error::SpectralAssumption("profile without a jump has no translational mode".into()))?;
        let zero_mode = z.mode.values.clone();
        let h = op.grid().h();
        let tsolver = op.shifted_solver(Complex64::new(0.0, 0.0), true)?;
        let start: Vec<Complex64> = (0..op.dim()).map(|k| Complex64::new(z.ell[k % n], 0.0)).collect();
        let raw = inverse_iteration(|x| tsolver.solve(x), &start, 2);
        let d: f64 = raw.iter().zip(&zero_mode).map(|(l, p)| l.re * p).sum::<f64>() * h;
        if !(d.abs() > 1e-12) {
            return Err(Error::Numerical("discrete left null vector is orthogonal to ψ₀".into()));
        }
        let left_null: Vec<f64> = raw.iter().map(|l| l.re / d).collect();
        let bordered = op.bordered_solver(0.0, vec![zero_mode.clone()], vec![left_null.iter().map(|l| l * h).collect()])?;
        Ok(Self { h, zero_mode, left_null, bordered })
    }

    pub(crate) fn coordinate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.left_null).map(|(a, b)| a * b).sum::<f64>() * self.h
    }

    pub(crate) fn remove(&self, f: &[f64]) -> Vec<f64> {
        let c = self.coordinate(f);
        f.iter().zip(&self.zero_mode).map(|(a, p)| a - c * p).collect()
    }

    pub(crate) fn mode(&self) -> &[f64] {
        &self.zero_mode
    }

    pub(crate) fn solve(&self, y: &[f64]) -> Vec<f64> {
        self.bordered.solve(y)
    }
}

impl PerturbationSystem {
    /// Builds the system from an operator assembled about `op.profile()`
    /// and its crossing pair.
    pub fn new(flux: FluxFamily, op: DiscreteLinearOperator, pair: SpectralPair) -> Result<Self> {
        let profile = op.profile();
        if flux.dim() != op.components() {
            return Err(Error::Dimension("flux and operator component counts differ".into()));
        }
        let eps = op.eps();
        let base_flux = (0..profile.values.grid.len()).flat_map(|i| flux.flux(eps, profile.state(i))).collect();
        let projectors = projections(&pair, &op)?;
        let neutral = NeutralMode::new(&op)?;
        Ok(Self { flux, eps, op, pair, projectors, base_flux, neutral })
    }

    /// The profile at `ε` (with `ū_k(0) = phase` when given) and the pair
    /// planted by `design`, whose eigenvector `V(1, i)` is known exactly.
    pub fn planted(flux: FluxFamily, design: &CrossingDesign, eps: f64, grid: Grid1D, phase: Option<f64>) -> Result<Self> {
        let profile = solve_profile(flux.as_ref(), eps, grid, phase)?;
        let base = assemble_linearized(&profile, flux.as_ref())?;
        let op = design.plant(&base)?;
        let modes = design.modes(grid, op.components(), 2);
        let v: Vec<Complex64> = modes[0].iter().zip(&modes[1]).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let lambda = Complex64::new(design.gamma(eps), design.tau(eps));
        let pair = pair_from_vector(&op, lambda, v, Vec::new())?;
        Self::new(flux, op, pair)
    }

    pub fn grid(&self) -> Grid1D {
        self.op.grid()
    }

    pub fn components(&self) -> usize {
        self.op.components()
    }

    pub fn profile(&self) -> &ShockProfile {
        self.op.profile()
    }

    pub fn gamma(&self) -> f64 {
        self.pair.lambda.re
    }

    pub fn tau(&self) -> f64 {
        self.pair.lambda.im
    }

    /// `2π/τ(ε)`.
    pub fn linear_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.tau()
    }

    pub fn zero(&self) -> GridFunction {
        GridFunction::zeros(self.grid(), self.components())
    }

    /// `Q(ε,u)` per node, row-major.
    pub fn q(&self, u: &[f64]) -> Vec<f64> {
        let n = self.components();
        let a = self.op.coefficients();
        let profile = self.profile();
        let mut out = vec![0.0; u.len()];
        let mut state = vec![0.0; n];
        for i in 0..u.len() / n {
            let ub = profile.state(i);
            let ui = &u[i * n..(i + 1) * n];
            state.iter_mut().zip(ub.iter().zip(ui)).for_each(|(s, (b, v))| *s = b + v);
            let f = self.flux.flux(self.eps, &state);
            for r in 0..n {
                let au: f64 = (0..n).map(|c| a[i * n * n + r * n + c] * ui[c]).sum();
                out[i * n + r] = -f[r] + self.base_flux[i * n + r] + au;
            }
        }
        out
    }

    /// `D Q(ε,u)`.
    pub fn nonlinearity(&self, u: &[f64]) -> Vec<f64> {
        let q = self.q(u);
        let n = self.components();
        let inv = 0.5 / self.grid().h();
        let len = q.len();
        (0..len)
            .map(|k| {
                let up = if k + n < len { q[k + n] } else { 0.0 };
                let dn = if k >= n { q[k - n] } else { 0.0 };
                inv * (up - dn)
            })
            .collect()
    }

    /// `u = 2ℜ(wφ₊) + v`.
    pub fn compose(&self, w: Complex64, v: &[f64]) -> Vec<f64> {
        self.projectors.phi().iter().zip(v).map(|(p, x)| 2.0 * (w * p).re + x).collect()
    }

    /// `h·Σ ℓ_d·f`, the `ψ₀` coordinate along the discrete left null vector.
    pub fn translational_coordinate(&self, f: &[f64]) -> f64 {
        self.neutral.coordinate(f)
    }

    /// `f − ψ₀·h⟨ℓ_d, f⟩`.
    pub fn remove_translational(&self, f: &[f64]) -> Vec<f64> {
        self.neutral.remove(f)
    }

    pub fn zero_mode(&self) -> &[f64] {
        self.neutral.mode()
    }

    /// Solves `Lx = y` for `y` (and `x`) with no `ψ₀` component.
    pub(crate) fn solve_off_kernel(&self, y: &[f64]) -> Vec<f64> {
        self.neutral.solve(y)
    }
}

impl LinearStepper for Semigroup {
    fn step(&self, v: &[f64], source: Option<&[f64]>) -> Vec<f64> {
        self.substep(2, v, source)
    }
}

/// Clamps node blocks of `n` values by their Euclidean modulus.
pub(crate) fn clamp_nodes(v: &[f64], n: usize, bound: f64) -> Option<Vec<f64>> {
    let mut out = v.to_vec();
    let mut clamped = false;
    for node in out.chunks_mut(n) {
        let m = node.iter().map(|x| x * x).sum::<f64>().sqrt();
        if m > bound {
            clamped = true;
            let s = truncation_psi(bound / m);
            node.iter_mut().for_each(|x| *x *= s);
        }
    }
    clamped.then_some(out)
}

/// `(Id − M^K)⁻¹y` for `M = A⁻¹B`, `A = I − (Δt/2)L`, `B = I + (Δt/2)L` on
/// the complement of `ψ₀`, with `y` already off `ψ₀` and the pair. From
/// `1/(1 − z^K) = (1/K)Σ_j 1/(1 − ω_j z)`, `ω_j = e^{2πij/K}`, each term
/// is `(A − ω_jB)⁻¹Ay = −2/((1+ω_j)Δt)·(L − σ_j)⁻¹Ay` with
/// `σ_j = −(2i/Δt)tan(πj/K)`; `j = K/2` gives `Ay/2` and `j = 0` is
/// `−(ΔtL)⁻¹Ay`, solved by `off_kernel`.
pub(crate) fn partial_fraction_inverse(
    op: &DiscreteLinearOperator,
    off_kernel: impl Fn(&[f64]) -> Vec<f64>,
    t: f64,
    k: usize,
    y: &[f64],
) -> Result<Vec<f64>> {
    if k % 2 != 0 || k < 4 {
        return Err(Error::Configuration(format!("steps per period {k} must be even and at least 4")));
    }
    let dt = t / k as f64;
    let ly = op.apply(y);
    let ay: Vec<f64> = y.iter().zip(&ly).map(|(a, b)| a - 0.5 * dt * b).collect();
    let ayc: Vec<Complex64> = ay.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    let t0 = off_kernel(&ay);
    let mut acc: Vec<f64> = t0.iter().zip(&ay).map(|(a, b)| -a / dt + 0.5 * b).collect();
    for j in 1..k / 2 {
        let omega = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / k as f64);
        let sigma = Complex64::new(0.0, -2.0 / dt * (PI * j as f64 / k as f64).tan());
        let x = op.shifted_solver(sigma, false)?.solve(&ayc);
        let c = -2.0 / ((1.0 + omega) * dt);
        acc.iter_mut().zip(&x).for_each(|(a, v)| *a += 2.0 * (c * v).re);
    }
    acc.iter_mut().for_each(|a| *a /= k as f64);
    Ok(acc)
}

impl PerturbationModel for PerturbationSystem {
    fn eps(&self) -> f64 {
        self.eps
    }

    fn eigenvalue(&self) -> Complex64 {
        self.pair.lambda
    }

    fn zero(&self) -> GridFunction {
        PerturbationSystem::zero(self)
    }

    fn coefficient(&self, f: &[f64]) -> Complex64 {
        self.projectors.coefficient(f)
    }

    fn pi_tilde(&self, f: &[f64]) -> Vec<f64> {
        self.projectors.pi_tilde_values(f)
    }

    fn compose(&self, w: Complex64, v: &[f64]) -> Vec<f64> {
        PerturbationSystem::compose(self, w, v)
    }

    fn nonlinearity(&self, u: &[f64]) -> Vec<f64> {
        PerturbationSystem::nonlinearity(self, u)
    }

    fn clamp(&self, v: &[f64], bound: f64) -> Option<Vec<f64>> {
        clamp_nodes(v, self.components(), bound)
    }

    fn strong_norm(&self, f: &[f64]) -> f64 {
        let modulus: Vec<f64> = f.chunks(self.components()).map(|x| x.iter().map(|y| y * y).sum::<f64>().sqrt()).collect();
        weighted_sup(&modulus, &self.grid(), 1)
    }

    fn mass(&self, f: &[f64]) -> Vec<f64> {
        self.op.mass(f)
    }

    fn linear_stepper(&self, dt: f64) -> Result<Box<dyn LinearStepper + '_>> {
        Ok(Box::new(Semigroup::crank_nicolson(self.op.clone(), dt, 1, None)?))
    }

    fn periodic_inverse(&self, t: f64, steps: usize, y: &[f64]) -> Result<Vec<f64>> {
        let y = self.remove_translational(&self.projectors.pi_tilde_values(y));
        let acc = partial_fraction_inverse(&self.op, |r| self.solve_off_kernel(r), t, steps, &y)?;
        let out = self.remove_translational(&self.projectors.pi_tilde_values(&acc));
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("periodic inverse produced non-finite values".into()));
        }
        Ok(out)
    }
}
