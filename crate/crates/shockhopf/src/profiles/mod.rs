//! Standing viscous shock profiles `ū′ = F(ε,ū) − F(ε,u₋)`: construction,
//! Lax classification and tail decay rates.

pub mod flux;
mod solve;

pub use flux::{exemplar, rankine_hugoniot_residual, Burgers, Exemplar2x2, Flux, FluxFamily};
pub use solve::{ode_residual, solve_profile, solve_profile_collocation, SolveOptions};

use crate::error::{Error, Result};
use crate::numerics::fit::fit_line;
use crate::spaces::{Grid1D, GridFunction};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const PROFILE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockProfile {
    pub schema_version: u32,
    pub flux_name: String,
    pub eps: f64,
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
    pub values: GridFunction,
    /// `ū′ = F(ε,ū) − F(ε,u₋)` at the nodes.
    pub derivative: GridFunction,
    pub decay_rate: Option<f64>,
    pub phase: f64,
    pub tolerance: f64,
    /// Which solver produced the samples: `"shooting"`, `"collocation"` or `"constant"`.
    pub method: String,
}

impl ShockProfile {
    pub fn grid(&self) -> Grid1D {
        self.values.grid
    }

    pub fn dim(&self) -> usize {
        self.values.n_comp
    }

    pub fn state(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.values.values[i * n..(i + 1) * n]
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Argument(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s).map_err(|e| Error::Argument(e.to_string()))?;
        if p.schema_version != PROFILE_SCHEMA_VERSION {
            return Err(Error::Argument(format!("profile schema {} unsupported", p.schema_version)));
        }
        Ok(p)
    }
}

/// Real eigen-decomposition of a small matrix; errors if any eigenvalue has a
/// non-negligible imaginary part. Returns `(λ, right eigenvector)` sorted by λ.
pub fn real_eigensystem(a: &DMatrix<f64>) -> Result<Vec<(f64, Vec<f64>)>> {
    let eig = a.complex_eigenvalues();
    let scale = a.norm().max(1.0);
    let mut out = Vec::new();
    for z in eig.iter() {
        if z.im.abs() > 1e-10 * scale {
            return Err(Error::SpectralAssumption(format!("complex eigenvalue {z}")));
        }
        out.push((z.re, null_vector(a, z.re)));
    }
    out.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(out)
}

/// Unit vector spanning the (numerical) kernel of `A − λI`.
pub fn null_vector(a: &DMatrix<f64>, lambda: f64) -> Vec<f64> {
    let n = a.nrows();
    let m = a - DMatrix::identity(n, n) * lambda;
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
    let mut v: Vec<f64> = vt.row(k).iter().copied().collect();
    // sign convention: largest entry positive
    let (imax, _) = v.iter().enumerate().fold((0, 0.0), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
    if v[imax] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaxReport {
    pub eig_minus: Vec<f64>,
    pub eig_plus: Vec<f64>,
    pub dim_stable_plus: usize,
    pub dim_unstable_minus: usize,
    /// Characteristic family `p = dim S(A₊)`.
    pub family: usize,
    pub lax_ok: bool,
    pub rh_residual: f64,
    pub reason: Option<String>,
}

pub fn classify_lax(flux: &dyn Flux, eps: f64) -> LaxReport {
    let n = flux.dim();
    let (um, up) = flux.endstates(eps);
    let rh_residual = rankine_hugoniot_residual(flux, eps);
    let spectrum = |u: &[f64]| -> (Vec<f64>, Option<String>) {
        let eig = flux.jacobian(eps, u).complex_eigenvalues();
        let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        let reason = if eig.iter().any(|z| z.im.abs() > 1e-10) {
            Some("complex eigenvalues".to_string())
        } else {
            None
        };
        (re, reason)
    };
    let (eig_minus, rm) = spectrum(&um);
    let (eig_plus, rp) = spectrum(&up);
    let dim_stable_plus = eig_plus.iter().filter(|l| **l < 0.0).count();
    let dim_unstable_minus = eig_minus.iter().filter(|l| **l > 0.0).count();
    let mut reason = rm.or(rp);
    let tol = 1e-10;
    for eig in [&eig_minus, &eig_plus] {
        if reason.is_none() && eig.iter().any(|l| l.abs() <= tol) {
            reason = Some("zero eigenvalue (characteristic endstate)".into());
        }
        if reason.is_none() && eig.windows(2).any(|w| (w[1] - w[0]).abs() <= tol) {
            reason = Some("repeated eigenvalue".into());
        }
    }
    if reason.is_none() && dim_stable_plus + dim_unstable_minus != n + 1 {
        reason = Some(format!(
            "dim S(A+) + dim U(A-) = {} != n+1 = {}",
            dim_stable_plus + dim_unstable_minus,
            n + 1
        ));
    }
    LaxReport {
        eig_minus,
        eig_plus,
        dim_stable_plus,
        dim_unstable_minus,
        family: dim_stable_plus,
        lax_ok: reason.is_none(),
        rh_residual,
        reason,
    }
}

/// Exponential tail rate from log-linear fits of `|ū − u±|` on both tails.
///
/// Only nodes whose deviation lies between `1e-9` and `1e-2` of the jump enter
/// the fit, which keeps roundoff and the nonlinear core out. The smaller of
/// the two one-sided rates is returned.
pub fn decay_rate(profile: &ShockProfile) -> Result<f64> {
    let g = profile.grid();
    let n = profile.dim();
    let jump: f64 =
        profile.u_minus.iter().zip(&profile.u_plus).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if jump == 0.0 {
        return Err(Error::DomainTooSmall("constant profile has no decaying tail".into()));
    }
    let dev = |i: usize, end: &[f64]| -> f64 {
        (0..n).map(|c| (profile.values.at(i, c) - end[c]).powi(2)).sum::<f64>().sqrt()
    };
    let mut rates = Vec::new();
    for (end, left) in [(&profile.u_minus, true), (&profile.u_plus, false)] {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..g.len() {
            let x = g.x(i);
            if (left && x > 0.0) || (!left && x < 0.0) {
                continue;
            }
            let d = dev(i, end);
            if d > 1e-9 * jump && d < 1e-2 * jump {
                xs.push(x.abs());
                ys.push(d.ln());
            }
        }
        if xs.len() < 5 {
            return Err(Error::DomainTooSmall("too few tail nodes in the exponential regime".into()));
        }
        let f = fit_line(&xs, &ys)?;
        if f.residual > 0.1 {
            return Err(Error::DomainTooSmall(format!("tail not exponential (fit residual {:.3})", f.residual)));
        }
        rates.push(-f.slope);
    }
    Ok(rates[0].min(rates[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burgers_classification() {
        let r = classify_lax(&Burgers::standard(), 0.0);
        assert_eq!(r.eig_minus, vec![1.0]);
        assert_eq!(r.eig_plus, vec![-1.0]);
        assert_eq!((r.dim_stable_plus, r.dim_unstable_minus), (1, 1));
        assert!(r.lax_ok);
        assert_eq!(r.rh_residual, 0.0);
    }

    #[test]
    fn characteristic_burgers_is_rejected() {
        let r = classify_lax(&Burgers::with_states(1.0, 0.0), 0.0);
        assert!(!r.lax_ok);
        assert!(r.reason.unwrap().contains("zero eigenvalue"));
    }

    #[test]
    fn exemplar_is_lax_one_shock() {
        let r = classify_lax(&Exemplar2x2::default(), 0.0);
        assert!(r.lax_ok, "{:?}", r.reason);
        assert_eq!((r.dim_stable_plus, r.dim_unstable_minus), (1, 2));
        assert_eq!(r.family, 1);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&r.eig_minus, &[0.5, 1.0]), "{:?}", r.eig_minus);
        assert!(close(&r.eig_plus, &[-1.0, 0.5]), "{:?}", r.eig_plus);
    }

    #[test]
    fn complex_spectrum_reported_not_thrown() {
        #[derive(Debug)]
        struct Rot;
        impl Flux for Rot {
            fn name(&self) -> String {
                "rot".into()
            }
            fn dim(&self) -> usize {
                2
            }
            fn flux(&self, _: f64, u: &[f64]) -> Vec<f64> {
                vec![-u[1], u[0]]
            }
            fn jacobian(&self, _: f64, _: &[f64]) -> DMatrix<f64> {
                DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
            }
            fn endstates(&self, _: f64) -> (Vec<f64>, Vec<f64>) {
                (vec![0.0, 0.0], vec![0.0, 0.0])
            }
        }
        let r = classify_lax(&Rot, 0.0);
        assert!(!r.lax_ok);
        assert_eq!(r.reason.as_deref(), Some("complex eigenvalues"));
    }

    #[test]
    fn eigensystem_vectors_are_eigenvectors() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -1.0, 0.5]);
        for (l, v) in real_eigensystem(&a).unwrap() {
            let av = &a * nalgebra::DVector::from_vec(v.clone());
            for k in 0..2 {
                assert!((av[k] - l * v[k]).abs() < 1e-12);
            }
        }
    }
}
