//! Excited plus scattering part of the pointwise Green function model.

use super::{errfn, TransverseKernel};
use crate::error::{Error, Result};
use crate::profiles::{real_eigensystem, Flux, ShockProfile};
use crate::spaces::GridFunction;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Characteristic data of one endstate with the scattering coefficients of
/// waves arriving from that side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideData {
    /// Eigenvalues `a_k` of `A±`.
    pub speeds: Vec<f64>,
    /// Left eigenvectors `l_k`, normalized so that `l_j·r_k = δ_jk`.
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
    /// `[c⁰_k]` for incoming families.
    pub excited: Vec<f64>,
    /// `reflect[k][j]`: incoming `k` into outgoing `j` on the same side.
    pub reflect: Vec<Vec<f64>>,
    /// `transmit[k][j]`: incoming `k` into outgoing `j` on the far side.
    pub transmit: Vec<Vec<f64>>,
}

impl SideData {
    /// Eigen-data of `A` with all coefficients zero.
    pub fn from_matrix(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let eig = real_eigensystem(a)?;
        let r = DMatrix::from_fn(n, n, |i, k| eig[k].1[i]);
        let l = r
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SpectralAssumption("eigenvectors not independent".into()))?;
        Ok(Self {
            speeds: eig.iter().map(|e| e.0).collect(),
            left: (0..n).map(|k| l.row(k).iter().copied().collect()).collect(),
            right: (0..n).map(|k| r.column(k).iter().copied().collect()).collect(),
            excited: vec![0.0; n],
            reflect: vec![vec![0.0; n]; n],
            transmit: vec![vec![0.0; n]; n],
        })
    }

    fn mirrored(&self) -> Self {
        let mut s = self.clone();
        s.speeds.iter_mut().for_each(|a| *a = -*a);
        s
    }
}

/// Model Green kernel `𝓔 + 𝓢` built from endstate spectral data.
///
/// `profile_derivative` samples `Ū′`; it is interpolated linearly and taken
/// as zero off the grid. Without it the excited term is dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreensModel {
    pub minus: SideData,
    pub plus: SideData,
    pub profile_derivative: Option<GridFunction>,
}

/// Cubic smoothstep: 0 for `t ≤ 1/2`, 1 for `t ≥ 1`.
pub fn time_cutoff(t: f64) -> f64 {
    let s = ((t - 0.5) / 0.5).clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

fn gaussian(d: f64, spread: f64) -> f64 {
    (4.0 * PI * spread).powf(-0.5) * (-d * d / (4.0 * spread)).exp()
}

impl GreensModel {
    pub fn new(minus: SideData, plus: SideData, profile_derivative: Option<GridFunction>) -> Result<Self> {
        let g = Self { minus, plus, profile_derivative };
        g.validate()?;
        Ok(g)
    }

    /// Spectral data at the endstates of a profile, coefficients zero.
    pub fn from_profile(flux: &dyn Flux, profile: &ShockProfile) -> Result<Self> {
        let minus = SideData::from_matrix(&flux.jacobian(profile.eps, &profile.u_minus))?;
        let plus = SideData::from_matrix(&flux.jacobian(profile.eps, &profile.u_plus))?;
        Self::new(minus, plus, Some(profile.derivative.clone()))
    }

    pub fn dim(&self) -> usize {
        self.minus.speeds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        for (name, s) in [("minus", &self.minus), ("plus", &self.plus)] {
            let sq = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
            if s.speeds.len() != n || !sq(&s.left) || !sq(&s.right) || s.excited.len() != n || !sq(&s.reflect) || !sq(&s.transmit)
            {
                return Err(Error::Dimension(format!("{name} spectral data is not {n}-dimensional")));
            }
            if s.speeds.iter().any(|a| *a == 0.0 || !a.is_finite()) {
                return Err(Error::SpectralAssumption(format!("{name} speeds must be finite and nonzero")));
            }
            for j in 0..n {
                for k in 0..n {
                    let d: f64 = s.left[j].iter().zip(&s.right[k]).map(|(a, b)| a * b).sum();
                    let want = if j == k { 1.0 } else { 0.0 };
                    if (d - want).abs() > 1e-8 {
                        return Err(Error::SpectralAssumption(format!(
                            "{name} eigenvectors not biorthonormal: l_{j}·r_{k} = {d}"
                        )));
                    }
                }
            }
        }
        if let Some(p) = &self.profile_derivative {
            if p.n_comp != n {
                return Err(Error::Dimension("profile derivative has wrong component count".into()));
            }
        }
        Ok(())
    }

    fn profile_derivative_at(&self, x: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if let Some(p) = &self.profile_derivative {
            let g = p.grid;
            if x.abs() > g.half_width() {
                return;
            }
            for (c, o) in out.iter_mut().enumerate() {
                *o = g.interp(&p.component(c), x);
            }
        }
    }

    /// `(𝓔 + 𝓢)(x,t;y)` as a row-major `n×n` matrix.
    pub fn eval(&self, x: f64, t: f64, y: f64) -> Result<Vec<f64>> {
        let (mut e, s) = self.eval_parts(x, t, y)?;
        e.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
        Ok(e)
    }

    /// The excited and scattering terms separately.
    pub fn eval_parts(&self, x: f64, t: f64, y: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if t <= 0.0 {
            return Err(Error::Domain(format!("green model needs t > 0, got {t}")));
        }
        let n = self.dim();
        let mut ex = vec![0.0; n * n];
        let mut sc = vec![0.0; n * n];
        let mut du = vec![0.0; n];
        self.profile_derivative_at(x, &mut du);
        if y <= 0.0 {
            one_side(&self.minus, &self.plus, x, t, y, &du, &mut ex, &mut sc);
        } else {
            // reflect x ↦ −x, y ↦ −y: the far side becomes the near side
            one_side(&self.plus.mirrored(), &self.minus.mirrored(), -x, t, -y, &du, &mut ex, &mut sc);
        }
        Ok((ex, sc))
    }
}

/// Both sums for a source at `y ≤ 0` on the `near` side. `du` is `Ū′` at the
/// physical point, which is unaffected by the mirror.
#[allow(clippy::too_many_arguments)]
fn one_side(near: &SideData, far: &SideData, x: f64, t: f64, y: f64, du: &[f64], ex: &mut [f64], sc: &mut [f64]) {
    let n = near.speeds.len();
    let outer = |out: &mut [f64], coef: f64, col: &[f64], row: &[f64]| {
        if coef == 0.0 {
            return;
        }
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] += coef * col[i] * row[j];
            }
        }
    };
    let mut add_outer = |coef: f64, col: &[f64], row: &[f64]| outer(sc, coef, col, row);
    let chi = time_cutoff(t);
    let rt4 = (4.0 * t).sqrt();
    let w_minus = 1.0 / (1.0 + (2.0 * x).exp()); // e^{−x}/(e^x+e^{−x})
    let w_plus = 1.0 - w_minus;
    for k in 0..n {
        let ak = near.speeds[k];
        let lk = &near.left[k];
        if ak > 0.0 {
            let c0 = near.excited[k];
            if c0 != 0.0 {
                let e = errfn((y + ak * t) / rt4) - errfn((y - ak * t) / rt4);
                outer(ex, c0 * e, du, lk);
            }
        }
        if chi == 0.0 {
            continue;
        }
        let direct = gaussian(x - y - ak * t, t);
        if ak < 0.0 {
            add_outer(chi * direct, &near.right[k], lk);
            continue;
        }
        add_outer(chi * direct * w_minus, &near.right[k], lk);
        let tk = t - y.abs() / ak;
        for j in 0..n {
            let aj = near.speeds[j];
            let c = near.reflect[k][j];
            if aj < 0.0 && c != 0.0 {
                let beta = scattered_rate((-x).max(0.0), t, y, aj, ak);
                add_outer(chi * c * gaussian(x - aj * tk, beta * t) * w_minus, &near.right[j], lk);
            }
            let aj = far.speeds[j];
            let c = near.transmit[k][j];
            if aj > 0.0 && c != 0.0 {
                let beta = scattered_rate(x.max(0.0), t, y, aj, ak);
                add_outer(chi * c * gaussian(x - aj * tk, beta * t) * w_plus, &far.right[j], lk);
            }
        }
    }
}

/// Effective diffusion rate along a scattered path, floored to keep the
/// Gaussian finite where both contributions vanish.
fn scattered_rate(x_part: f64, t: f64, y: f64, aj: f64, ak: f64) -> f64 {
    let b = x_part / (aj * t).abs() + y.abs() / (ak * t).abs() * (aj / ak).powi(2);
    b.max(1e-12)
}

impl TransverseKernel for GreensModel {
    fn components(&self) -> usize {
        self.dim()
    }

    fn kernel_value(&self, x: f64, t: f64, y: f64, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.eval(x, t, y)?);
        Ok(())
    }
}
