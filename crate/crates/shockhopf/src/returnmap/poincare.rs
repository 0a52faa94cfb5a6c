use super::flow::solve_period_run;
use super::{FlowOptions, PerturbationModel, PerturbationSystem, TruncationOrder};
use crate::bifurcation::{DiscreteSystem, StepEval};
use crate::error::{Error, Result};
use crate::linops::CrossingDesign;
use crate::profiles::{exemplar, FluxFamily};
use crate::spaces::{norm, Grid1D, GridFunction, NormKind};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// A one-parameter family of perturbation models on a fixed layout.
pub trait ModelFamily: Send + Sync {
    type Model: PerturbationModel;

    fn at(&self, eps: f64) -> Result<Self::Model>;

    /// The transverse origin.
    fn zero(&self) -> GridFunction;

    fn weak_norm(&self, b: &GridFunction) -> Result<f64> {
        norm(b, NormKind::B1, None)
    }

    fn strong_norm(&self, b: &GridFunction) -> Result<f64> {
        norm(b, NormKind::X1, None)
    }
}

/// A flux family with a planted crossing pair on a fixed grid; yields the
/// perturbation system at each `ε`.
#[derive(Clone, Debug)]
pub struct SystemFamily {
    pub flux: FluxFamily,
    pub design: CrossingDesign,
    pub grid: Grid1D,
    /// Profile phase passed to the profile solver.
    pub phase: Option<f64>,
}

impl SystemFamily {
    /// The shipped 2×2 exemplar with the default crossing design.
    pub fn exemplar(grid: Grid1D) -> Self {
        Self {
            flux: exemplar("exemplar2x2").expect("the 2×2 exemplar is registered"),
            design: CrossingDesign::default(),
            grid,
            phase: None,
        }
    }

}

impl ModelFamily for SystemFamily {
    type Model = PerturbationSystem;

    fn at(&self, eps: f64) -> Result<PerturbationSystem> {
        PerturbationSystem::planted(self.flux.clone(), &self.design, eps, self.grid, self.phase)
    }

    fn zero(&self) -> GridFunction {
        GridFunction::zeros(self.grid, self.flux.dim())
    }
}

/// The return map `(a, b) ↦ (â, b̂)` of the truncated flow at its first
/// return time, split as `R = e^{γT}`, `S = M^K` with `M` the Crank–Nicolson
/// step of `L` at `Δt = T/K`, `N₁ = â − Ra`, `N₂ = b̂ − Sb`.
///
/// The transverse coordinate is taken modulo the neutral modes: `ψ₀` is an
/// eigenvector of `S` with eigenvalue `≈ 1`, its coordinate is conserved
/// with the mass, and the right inverse acts on the complement.
pub struct PoincareSystem<F: ModelFamily = SystemFamily> {
    pub family: F,
    pub flow: FlowOptions,
    cache: Mutex<HashMap<u64, Arc<F::Model>>>,
}

/// Poincaré system of `family` with truncation constant `c0` and `order`.
pub fn assemble_poincare<F: ModelFamily>(family: F, c0: f64, order: TruncationOrder) -> Result<PoincareSystem<F>> {
    if !(c0 > 0.0) {
        return Err(Error::Argument(format!("truncation constant {c0} must be positive")));
    }
    Ok(PoincareSystem::new(family, FlowOptions { truncation: c0, order, ..Default::default() }))
}

impl<F: ModelFamily> PoincareSystem<F> {
    pub fn new(family: F, flow: FlowOptions) -> Self {
        Self { family, flow, cache: Mutex::new(HashMap::new()) }
    }

    /// The model at `ε`, built once per `ε`.
    pub fn system(&self, eps: f64) -> Result<Arc<F::Model>> {
        let key = eps.to_bits();
        if let Some(s) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let sys = Arc::new(self.family.at(eps)?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() > 64 {
            cache.clear();
        }
        Ok(cache.entry(key).or_insert(sys).clone())
    }

    /// `S b = M^K b` for the period `t`.
    pub fn transverse_map(&self, sys: &F::Model, t: f64, b: &[f64]) -> Result<Vec<f64>> {
        let k = self.flow.steps;
        let stepper = sys.linear_stepper(t / k as f64)?;
        let mut v = b.to_vec();
        for _ in 0..k {
            v = stepper.step(&v, None);
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("time step produced non-finite values".into()));
        }
        Ok(v)
    }

    /// `(Id − S)⁻¹y` on the complement of the pair and the neutral modes.
    pub fn periodic_inverse(&self, sys: &F::Model, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        sys.periodic_inverse(t, self.flow.steps, y)
    }

    fn trivial(&self, sys: &F::Model) -> StepEval {
        let t = sys.linear_period();
        let zero = sys.zero();
        StepEval { r: (sys.gamma() * t).exp(), n1: 0.0, a_hat: 0.0, b_hat: zero.clone(), n2: zero, period: t }
    }
}

impl<F: ModelFamily> DiscreteSystem for PoincareSystem<F> {
    fn zero_b(&self) -> GridFunction {
        self.family.zero()
    }

    fn evaluate(&self, eps: f64, a: f64, b: &GridFunction) -> Result<StepEval> {
        let sys = self.system(eps)?;
        sys.zero().check_same(b)?;
        if a == 0.0 {
            if b.values.iter().any(|x| *x != 0.0) {
                return Err(Error::Argument("the return map at a = 0 is defined only at b = 0".into()));
            }
            return Ok(self.trivial(&sys));
        }
        let (period, flow) = solve_period_run(sys.as_ref(), a, b, &self.flow)?;
        let t = period.period;
        let r = (sys.gamma() * t).exp();
        let a_hat = a.signum() * flow.w_final().norm();
        let sb = self.transverse_map(&sys, t, &b.values)?;
        let b_hat = flow.v_final;
        let n2 = GridFunction::new(b.grid, b.n_comp, b_hat.values.iter().zip(&sb).map(|(x, y)| x - y).collect())?;
        Ok(StepEval { r, n1: a_hat - r * a, a_hat, b_hat, n2, period: t })
    }

    fn right_inverse(&self, eps: f64, _a: f64, b: &GridFunction, step: &StepEval) -> Result<GridFunction> {
        let sys = self.system(eps)?;
        let x = self.periodic_inverse(&sys, step.period, &step.n2.values)?;
        GridFunction::new(b.grid, b.n_comp, x)
    }

    fn weak_norm(&self, b: &GridFunction) -> Result<f64> {
        self.family.weak_norm(b)
    }

    fn strong_norm(&self, b: &GridFunction) -> Result<f64> {
        self.family.strong_norm(b)
    }
}
