use nalgebra::DMatrix;
use std::sync::Arc;

/// A parametrized flux `F(ε, u)` with its Jacobian and endstates.
pub trait Flux: Send + Sync + std::fmt::Debug {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn flux(&self, eps: f64, u: &[f64]) -> Vec<f64>;
    fn jacobian(&self, eps: f64, u: &[f64]) -> DMatrix<f64>;
    /// `(u₋, u₊)`.
    fn endstates(&self, eps: f64) -> (Vec<f64>, Vec<f64>);
    fn eps_range(&self) -> (f64, f64) {
        (-0.1, 0.1)
    }
}

pub type FluxFamily = Arc<dyn Flux>;

/// `‖F(ε,u₊) − F(ε,u₋)‖₂`.
pub fn rankine_hugoniot_residual(flux: &dyn Flux, eps: f64) -> f64 {
    let (um, up) = flux.endstates(eps);
    let fm = flux.flux(eps, &um);
    let fp = flux.flux(eps, &up);
    fm.iter().zip(&fp).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Burgers flux `u²/2 − s(ε)u` with endstates `u∓ + s(ε)`.
///
/// The shift `s(ε) = shift_rate·ε` realizes an ε-family as a change of frame.
/// The shock is standing only for `u₊ = −u₋`; other states are kept for
/// classification examples.
#[derive(Clone, Debug)]
pub struct Burgers {
    pub u_minus: f64,
    pub u_plus: f64,
    pub shift_rate: f64,
}

impl Burgers {
    pub fn standard() -> Self {
        Self { u_minus: 1.0, u_plus: -1.0, shift_rate: 0.0 }
    }

    pub fn with_states(u_minus: f64, u_plus: f64) -> Self {
        Self { u_minus, u_plus, shift_rate: 0.0 }
    }

    fn shift(&self, eps: f64) -> f64 {
        self.shift_rate * eps
    }
}

impl Flux for Burgers {
    fn name(&self) -> String {
        format!("burgers({},{},{})", self.u_minus, self.u_plus, self.shift_rate)
    }
    fn dim(&self) -> usize {
        1
    }
    fn flux(&self, eps: f64, u: &[f64]) -> Vec<f64> {
        vec![0.5 * u[0] * u[0] - self.shift(eps) * u[0]]
    }
    fn jacobian(&self, eps: f64, u: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, u[0] - self.shift(eps))
    }
    fn endstates(&self, eps: f64) -> (Vec<f64>, Vec<f64>) {
        let s = self.shift(eps);
        (vec![self.u_minus + s], vec![self.u_plus + s])
    }
}

/// Two-component Lax 1-shock used as the shipped system exemplar:
/// `F(u) = (u₁²/2, b·u₂ + κ·u₁²/2)` between `(1,0)` and `(−1,0)`.
///
/// The first component is a Burgers shock; the second is a linear field with
/// speed `b ∈ (0,1)` driven by the first, so `A₋` has speeds `{b, 1}` and `A₊`
/// has `{−1, b}`. The flux does not depend on ε; the crossing pair of the
/// family is planted at the operator level (see `linops::planted`).
#[derive(Clone, Debug)]
pub struct Exemplar2x2 {
    pub b: f64,
    pub kappa: f64,
}

impl Default for Exemplar2x2 {
    fn default() -> Self {
        Self { b: 0.5, kappa: 1.0 }
    }
}

impl Flux for Exemplar2x2 {
    fn name(&self) -> String {
        format!("exemplar2x2({},{})", self.b, self.kappa)
    }
    fn dim(&self) -> usize {
        2
    }
    fn flux(&self, _eps: f64, u: &[f64]) -> Vec<f64> {
        vec![0.5 * u[0] * u[0], self.b * u[1] + 0.5 * self.kappa * u[0] * u[0]]
    }
    fn jacobian(&self, _eps: f64, u: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[u[0], 0.0, self.kappa * u[0], self.b])
    }
    fn endstates(&self, _eps: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![1.0, 0.0], vec![-1.0, 0.0])
    }
}

/// Looks up a shipped flux by exemplar name.
pub fn exemplar(name: &str) -> Option<FluxFamily> {
    match name {
        "burgers" => Some(Arc::new(Burgers::standard())),
        "exemplar2x2" => Some(Arc::new(Exemplar2x2::default())),
        _ => None,
    }
}
