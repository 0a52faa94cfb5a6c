use crate::error::{Error, Result};
use crate::profiles::{real_eigensystem, Flux};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Dispersion curves `λ_j(ξ) = i a_j ξ − ξ²` of the far-field operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssentialEnvelope {
    /// All characteristic speeds of `A₋` followed by those of `A₊`.
    pub speeds: Vec<f64>,
    pub xi: Vec<f64>,
    /// `curves[j][k] = λ_j(xi[k])`.
    pub curves: Vec<Vec<Complex64>>,
}

pub fn dispersion(a: f64, xi: f64) -> Complex64 {
    Complex64::new(-xi * xi, a * xi)
}

/// Samples the dispersion curves at both endstates over `xi`.
pub fn essential_envelope(flux: &dyn Flux, eps: f64, xi: &[f64]) -> Result<EssentialEnvelope> {
    let (um, up) = flux.endstates(eps);
    let mut speeds = Vec::new();
    for u in [&um, &up] {
        speeds.extend(real_eigensystem(&flux.jacobian(eps, u))?.into_iter().map(|e| e.0));
    }
    EssentialEnvelope::from_speeds(speeds, xi)
}

impl EssentialEnvelope {
    pub fn from_speeds(speeds: Vec<f64>, xi: &[f64]) -> Result<Self> {
        if speeds.iter().any(|a| !a.is_finite()) {
            return Err(Error::SpectralAssumption("non-finite characteristic speed".into()));
        }
        let curves = speeds.iter().map(|&a| xi.iter().map(|&x| dispersion(a, x)).collect()).collect();
        Ok(Self { speeds, xi: xi.to_vec(), curves })
    }

    /// Largest real part over the samples with `|ξ| ≥ xi_min`.
    pub fn max_real(&self, xi_min: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for c in &self.curves {
            for (z, x) in c.iter().zip(&self.xi) {
                if x.abs() >= xi_min {
                    best = best.max(z.re);
                }
            }
        }
        best
    }

    /// Horizontal distance from `λ` to the rightmost curve at height `ℑλ`:
    /// positive when `λ` lies to the right of every curve.
    pub fn margin(&self, lambda: Complex64) -> f64 {
        let edge = self
            .speeds
            .iter()
            .map(|&a| {
                if a == 0.0 {
                    if lambda.im == 0.0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    let xi = lambda.im / a;
                    -xi * xi
                }
            })
            .fold(f64::NEG_INFINITY, f64::max);
        lambda.re - edge
    }
}
