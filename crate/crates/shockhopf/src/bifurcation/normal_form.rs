use super::{DiscreteSystem, StepEval};
use crate::error::{Error, Result};
use crate::spaces::{quadrature, Grid1D, GridFunction, QuadratureRule};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Return map of the polar Hopf normal form `ṙ = εr + σr³`, `θ̇ = ω` over
/// one revolution `T = 2π/ω`, with a transverse block `ḃ_k = −κ_k b_k + c_k r²`
/// driven by the amplitude. `σ = −1` is supercritical, `σ = +1`
/// subcritical. The scalar block is evaluated in closed form, so
/// `R = e^{εT}` and the equilibria satisfy `ε(a) = −σa²` exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfNormalForm {
    pub cubic: f64,
    pub frequency: f64,
    pub decay: Vec<f64>,
    pub coupling: Vec<f64>,
}

impl HopfNormalForm {
    pub fn supercritical() -> Self {
        Self { cubic: -1.0, frequency: 1.0, decay: vec![0.5, 1.0, 2.0], coupling: vec![1.0, -0.5, 0.25] }
    }

    pub fn subcritical() -> Self {
        Self { cubic: 1.0, ..Self::supercritical() }
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.frequency
    }

    fn grid(&self) -> Grid1D {
        Grid1D::new(1.0, self.decay.len()).expect("transverse dimension is odd and at least 3")
    }

    /// `r(t)` from `r(0) = a ≥ 0`, via `w = r⁻²`, `ẇ = −2εw − 2σ`.
    pub fn radius(&self, eps: f64, a: f64, t: f64) -> Result<f64> {
        if a == 0.0 {
            return Ok(0.0);
        }
        let x = -2.0 * eps * t;
        let phi = if eps == 0.0 { -2.0 * t } else { x.exp_m1() / eps };
        let w = x.exp() / (a * a) + self.cubic * phi;
        if !(w > 0.0) {
            return Err(Error::Domain(format!("amplitude blows up before t = {t} at ε = {eps}, a = {a}")));
        }
        Ok(w.sqrt().recip())
    }
}

impl DiscreteSystem for HopfNormalForm {
    fn zero_b(&self) -> GridFunction {
        GridFunction::zeros(self.grid(), 1)
    }

    fn evaluate(&self, eps: f64, a: f64, b: &GridFunction) -> Result<StepEval> {
        let zero = self.zero_b();
        zero.check_same(b)?;
        let t = self.period();
        let r = (eps * t).exp();
        let a_hat = a.signum() * self.radius(eps, a.abs(), t)?;
        // ∫₀ᵀ e^{−κ(T−s)} r(s)² ds on a fine Simpson grid
        let m = 4001;
        let r2: Vec<f64> = (0..m)
            .map(|i| self.radius(eps, a.abs(), t * i as f64 / (m - 1) as f64).map(|v| v * v))
            .collect::<Result<_>>()?;
        let mut n2 = zero.clone();
        let mut b_hat = zero;
        for (k, (&kappa, &c)) in self.decay.iter().zip(&self.coupling).enumerate() {
            let integrand: Vec<f64> = r2
                .iter()
                .enumerate()
                .map(|(i, v)| (-kappa * t * (1.0 - i as f64 / (m - 1) as f64)).exp() * v)
                .collect();
            n2.values[k] = c * quadrature(&integrand, t / (m - 1) as f64, QuadratureRule::Simpson)?;
            b_hat.values[k] = (-kappa * t).exp() * b.values[k] + n2.values[k];
        }
        Ok(StepEval { r, n1: a_hat - r * a, a_hat, b_hat, n2, period: t })
    }

    fn right_inverse(&self, _eps: f64, _a: f64, _b: &GridFunction, step: &StepEval) -> Result<GridFunction> {
        let t = self.period();
        let mut out = step.n2.clone();
        for (v, kappa) in out.values.iter_mut().zip(&self.decay) {
            *v /= -(-kappa * t).exp_m1();
        }
        Ok(out)
    }
}
