//! Return map of the perturbation equation about a viscous shock: the
//! oscillatory/transverse splitting `u = 2ℜ(wφ₊) + v`, the truncated flow,
//! the period solve in polar coordinates and the periodic-orbit search.

mod flow;
mod orbit;
mod poincare;
pub(crate) mod system;

pub use flow::{evolve_state, evolve_truncated, solve_period, PeriodSolve, TruncatedFlow};
pub use orbit::{correlation_shift, find_periodic_orbit, OrbitOptions, PeriodicOrbit};
pub use poincare::{assemble_poincare, ModelFamily, PoincareSystem, SystemFamily};
pub use system::PerturbationSystem;

use crate::error::Result;
use crate::spaces::GridFunction;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A perturbation equation `u_t = Lu + 𝒩(u)` with a simple crossing pair
/// `λ₊ = γ + iτ`, split as `u = P(w) + v` with `w` the pair coordinate and
/// `v` in the complementary invariant subspace. States are real vectors laid
/// out like `zero()`.
pub trait PerturbationModel: Send + Sync {
    fn eps(&self) -> f64;
    /// `λ₊`.
    fn eigenvalue(&self) -> Complex64;
    /// The transverse origin, fixing the state layout.
    fn zero(&self) -> GridFunction;
    /// The pair coordinate `w` of `f`.
    fn coefficient(&self, f: &[f64]) -> Complex64;
    /// `f` with its pair component removed.
    fn pi_tilde(&self, f: &[f64]) -> Vec<f64>;
    /// The state with pair coordinate `w` and complement `v`.
    fn compose(&self, w: Complex64, v: &[f64]) -> Vec<f64>;
    /// `𝒩(u)`.
    fn nonlinearity(&self, u: &[f64]) -> Vec<f64>;
    /// `ψ(bound/|v|)v` pointwise in physical space, or `None` when
    /// `|v| ≤ bound` everywhere.
    fn clamp(&self, v: &[f64], bound: f64) -> Option<Vec<f64>>;
    /// `sup (1+|x₁|)|f|` over physical space.
    fn strong_norm(&self, f: &[f64]) -> f64;
    /// Integrals of the conserved components.
    fn mass(&self, f: &[f64]) -> Vec<f64>;
    /// Crank–Nicolson step of `L` with step `dt`.
    fn linear_stepper(&self, dt: f64) -> Result<Box<dyn LinearStepper + '_>>;
    /// `(Id − M^K)⁻¹y` on the complement of the pair and of the neutral
    /// modes, `M` the step at `Δt = t/K`.
    fn periodic_inverse(&self, t: f64, steps: usize, y: &[f64]) -> Result<Vec<f64>>;

    fn gamma(&self) -> f64 {
        self.eigenvalue().re
    }

    fn tau(&self) -> f64 {
        self.eigenvalue().im
    }

    /// `2π/τ(ε)`.
    fn linear_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.tau()
    }
}

/// One step `v ↦ (I − Δt/2 L)⁻¹((I + Δt/2 L)v + Δt s)`.
pub trait LinearStepper {
    fn step(&self, v: &[f64], source: Option<&[f64]>) -> Vec<f64>;
}

/// `ψ(z) = z` on `[0, ½]`, `1` on `[1, ∞)`, joined on `(½, 1)` by the quintic
/// `½ + ½p(2z − 1)`, `p(s) = s + 4s³ − 7s⁴ + 3s⁵`, which matches value, slope
/// and curvature at both ends (so `ψ ∈ C²`). The slope peaks at `z = 0.7`
/// with `ψ′ = 1.512`: a C¹ join from slope 1 to slope 0 over a unit rise on
/// an interval of length ½ must exceed slope 1 somewhere.
pub fn truncation_psi(z: f64) -> f64 {
    if z <= 0.5 {
        z
    } else if z >= 1.0 {
        1.0
    } else {
        let s = 2.0 * z - 1.0;
        0.5 + 0.5 * s * (1.0 + s * s * (4.0 + s * (-7.0 + 3.0 * s)))
    }
}

/// `ψ′(z)`.
pub fn truncation_psi_derivative(z: f64) -> f64 {
    if z <= 0.5 {
        1.0
    } else if z >= 1.0 {
        0.0
    } else {
        let s = 2.0 * z - 1.0;
        1.0 + s * s * (12.0 + s * (-28.0 + 15.0 * s))
    }
}

/// How the transverse component is clamped against the amplitude: `linear`
/// compares `|v(x)|` with `C₀|w|`, `quadratic` with `C₀|w|²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruncationOrder {
    Linear,
    Quadratic,
}

impl TruncationOrder {
    fn scale(&self, w_abs: f64) -> f64 {
        match self {
            TruncationOrder::Linear => w_abs,
            TruncationOrder::Quadratic => w_abs * w_abs,
        }
    }
}

/// Time stepping and truncation settings of the perturbation flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// `C₀`.
    pub truncation: f64,
    pub order: TruncationOrder,
    /// Steps per period.
    pub steps: usize,
    /// `C` in `|a|/C ≤ |w(t)| ≤ C|a|`.
    pub amplitude_bound: f64,
    /// `false` drops the nonlinearity.
    pub nonlinear: bool,
    /// Keep `v` every this many steps (0: never).
    pub snapshot_every: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { truncation: 10.0, order: TruncationOrder::Linear, steps: 512, amplitude_bound: 4.0, nonlinear: true, snapshot_every: 0 }
    }
}
