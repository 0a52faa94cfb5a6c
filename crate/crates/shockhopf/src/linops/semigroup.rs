use super::{DiscreteLinearOperator, SpectralPair};
use crate::error::{Error, Result};
use crate::numerics::band::LowRankSolver;
use crate::resummation::OneStep;
use crate::spaces::{norm, Grid1D, GridFunction, NormKind};
use num_complex::Complex64;

/// `Πf = 2ℜ(φ₊⟨φ̃₊, f⟩)`, `Π̃ = Id − Π` and `Π₀f = ψ₀⟨ℓ, f⟩`, with the
/// pairing `⟨g, f⟩ = h·Σ g_i f_i`. For real `f` the `λ₋` term is the conjugate
/// of the `λ₊` term.
#[derive(Clone, Debug)]
pub struct Projectors {
    grid: Grid1D,
    n: usize,
    phi: Vec<Complex64>,
    phi_tilde: Vec<Complex64>,
    zero_mode: Option<Vec<f64>>,
    ell: Option<Vec<f64>>,
}

/// Builds the projectors of `pair` on `op`. The left eigenfunction is
/// renormalized against the right one.
pub fn projections(pair: &SpectralPair, op: &DiscreteLinearOperator) -> Result<Projectors> {
    op.check(&pair.right)?;
    op.check(&pair.left)?;
    let h = op.grid().h();
    let phi = pair.right.values.clone();
    let d: Complex64 = pair.left.values.iter().zip(&phi).map(|(a, b)| a * b).sum::<Complex64>() * h;
    let scale = h * crate::numerics::norm2(&phi) * crate::numerics::norm2(&pair.left.values);
    if !(d.norm() > 1e-8 * scale) {
        return Err(Error::Numerical(format!("degenerate eigenfunction normalization ⟨φ̃,φ⟩ = {d}")));
    }
    let phi_tilde = pair.left.values.iter().map(|z| z / d).collect();
    let (zero_mode, ell) = match op.zero_mode() {
        Some(z) => (Some(z.mode.values.clone()), Some(z.ell.clone())),
        None => (None, None),
    };
    Ok(Projectors { grid: op.grid(), n: op.components(), phi, phi_tilde, zero_mode, ell })
}

impl Projectors {
    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn components(&self) -> usize {
        self.n
    }

    pub fn phi(&self) -> &[Complex64] {
        &self.phi
    }

    pub fn phi_tilde(&self) -> &[Complex64] {
        &self.phi_tilde
    }

    /// `⟨φ̃₊, f⟩`.
    pub fn coefficient(&self, f: &[f64]) -> Complex64 {
        self.phi_tilde.iter().zip(f).map(|(a, b)| a * b).sum::<Complex64>() * self.grid.h()
    }

    pub fn pi_values(&self, f: &[f64]) -> Vec<f64> {
        let c = self.coefficient(f);
        self.phi.iter().map(|p| 2.0 * (p * c).re).collect()
    }

    pub fn pi_tilde_values(&self, f: &[f64]) -> Vec<f64> {
        let c = self.coefficient(f);
        f.iter().zip(&self.phi).map(|(v, p)| v - 2.0 * (p * c).re).collect()
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.grid != self.grid || f.n_comp != self.n {
            return Err(Error::Dimension("grid function does not match the projector grid".into()));
        }
        Ok(())
    }

    pub fn pi(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        GridFunction::new(self.grid, self.n, self.pi_values(&f.values))
    }

    pub fn pi_tilde(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        GridFunction::new(self.grid, self.n, self.pi_tilde_values(&f.values))
    }

    /// `⟨ℓ, f⟩`.
    pub fn ell_pairing(&self, f: &[f64]) -> Result<f64> {
        let ell = self.ell.as_ref().ok_or_else(|| Error::SpectralAssumption("no translational mode".into()))?;
        Ok(f.iter().enumerate().map(|(k, v)| v * ell[k % self.n]).sum::<f64>() * self.grid.h())
    }

    pub fn pi0(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        let c = self.ell_pairing(&f.values)?;
        let z = self.zero_mode.as_ref().expect("ell and zero mode are set together");
        GridFunction::new(self.grid, self.n, z.iter().map(|v| c * v).collect())
    }
}

/// `e^{Lt}` by Crank–Nicolson with a fixed number of substeps. By default the
/// first substep is replaced by two implicit Euler half-steps, which damp the
/// grid-scale content of rough data. All steps share one factorization of
/// `I − (Δt/2)L`.
#[derive(Clone, Debug)]
pub struct Semigroup {
    op: DiscreteLinearOperator,
    period: f64,
    substeps: usize,
    solver: LowRankSolver<f64>,
    projector: Option<Projectors>,
    smoothing_start: bool,
}

impl Semigroup {
    /// With a projector, `apply` realizes `e^{L̃T}Π̃`.
    pub fn new(op: DiscreteLinearOperator, period: f64, substeps: usize, projector: Option<Projectors>) -> Result<Self> {
        if !(period > 0.0) || substeps == 0 {
            return Err(Error::Domain(format!("need t > 0 and substeps ≥ 1, got t = {period}, {substeps}")));
        }
        if let Some(p) = &projector {
            if p.grid() != op.grid() || p.components() != op.components() {
                return Err(Error::Dimension("projector does not match the operator grid".into()));
            }
        }
        let dt = period / substeps as f64;
        let solver = op.implicit_solver(0.5 * dt)?;
        Ok(Self { op, period, substeps, solver, projector, smoothing_start: true })
    }

    /// Plain Crank–Nicolson from the first substep, so one period is the
    /// `substeps`-th power of a single rational function of `L`.
    pub fn crank_nicolson(
        op: DiscreteLinearOperator,
        period: f64,
        substeps: usize,
        projector: Option<Projectors>,
    ) -> Result<Self> {
        Ok(Self { smoothing_start: false, ..Self::new(op, period, substeps, projector)? })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Substep `k` (from 1) applied to `u`, with an explicit source `s`
    /// entering as `Δt·s` on the right-hand side.
    pub fn substep(&self, k: usize, u: &[f64], source: Option<&[f64]>) -> Vec<f64> {
        let dt = self.dt();
        let half = 0.5 * dt;
        if k == 1 && self.smoothing_start {
            let mut rhs = u.to_vec();
            if let Some(s) = source {
                rhs.iter_mut().zip(s).for_each(|(r, v)| *r += half * v);
            }
            let mut y = self.solver.solve(&rhs);
            if let Some(s) = source {
                y.iter_mut().zip(s).for_each(|(r, v)| *r += half * v);
            }
            return self.solver.solve(&y);
        }
        let lu = self.op.apply(u);
        let mut rhs: Vec<f64> = u.iter().zip(&lu).map(|(a, b)| a + half * b).collect();
        if let Some(s) = source {
            rhs.iter_mut().zip(s).for_each(|(r, v)| *r += dt * v);
        }
        self.solver.solve(&rhs)
    }

    pub fn operator(&self) -> &DiscreteLinearOperator {
        &self.op
    }

    pub fn projector(&self) -> Option<&Projectors> {
        self.projector.as_ref()
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn dt(&self) -> f64 {
        self.period / self.substeps as f64
    }

    fn checked(&self, v: Vec<f64>) -> Result<Vec<f64>> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(Error::Numerical("time step produced non-finite values".into()))
        }
    }

    /// Runs `steps` substeps from `f` (projected first when a projector is
    /// set), calling `observe(k, u_k)` after each.
    pub fn evolve_with<O: FnMut(usize, &[f64])>(&self, f: &[f64], steps: usize, mut observe: O) -> Result<Vec<f64>> {
        let mut u = match &self.projector {
            Some(p) => p.pi_tilde_values(f),
            None => f.to_vec(),
        };
        for k in 1..=steps {
            u = self.checked(self.substep(k, &u, None))?;
            observe(k, &u);
        }
        Ok(u)
    }

    pub fn evolve(&self, f: &[f64], steps: usize) -> Result<Vec<f64>> {
        self.evolve_with(f, steps, |_, _| {})
    }

    /// `max_k ‖u_k‖_{X₁}/‖f‖_{X₁}` over one period and all inputs.
    pub fn x1_stability(&self, inputs: &[GridFunction]) -> Result<f64> {
        let mut c: f64 = 0.0;
        for f in inputs {
            self.op.check(f)?;
            let f0 = norm(f, NormKind::X1, None)?;
            if f0 == 0.0 {
                continue;
            }
            let g = self.op.grid();
            let n = self.op.components();
            let mut worst: f64 = 0.0;
            self.evolve_with(&f.values, self.substeps, |_, u| {
                let gf = GridFunction { grid: g, n_comp: n, values: u.to_vec() };
                worst = worst.max(norm(&gf, NormKind::X1, None).unwrap_or(f64::INFINITY));
            })?;
            c = c.max(worst / f0);
        }
        Ok(c)
    }
}

impl OneStep for Semigroup {
    fn grid(&self) -> Grid1D {
        self.op.grid()
    }

    fn components(&self) -> usize {
        self.op.components()
    }

    fn period(&self) -> f64 {
        self.period
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.op.check(f)?;
        GridFunction::new(self.op.grid(), self.op.components(), self.evolve(&f.values, self.substeps)?)
    }

    fn check_transverse(&self) -> Result<()> {
        if self.op.planted().is_some() && self.projector.is_none() {
            return Err(Error::Configuration("operator carries a crossing pair but no transverse projection".into()));
        }
        Ok(())
    }
}

/// `e^{Lt}f`, or `e^{L̃t}Π̃f` when a projector is given.
pub fn semigroup_step(
    op: &DiscreteLinearOperator,
    f: &GridFunction,
    t: f64,
    substeps: usize,
    projector: Option<&Projectors>,
) -> Result<GridFunction> {
    Semigroup::new(op.clone(), t, substeps, projector.cloned())?.apply(f)
}
