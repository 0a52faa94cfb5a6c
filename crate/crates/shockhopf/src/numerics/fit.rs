use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Straight-line least-squares fit `y ≈ intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::Dimension("fit abscissa and ordinate differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::Argument("need at least two points for a line fit".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::Argument("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual =
        (x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    Ok(LineFit { slope, intercept, residual })
}

/// Log-log fit `y ≈ C x^p`; `intercept` is `ln C`.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|v| *v <= 0.0 || !v.is_finite()) {
        return Err(Error::Argument("power-law fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Least-squares polynomial in the given powers, e.g. `[2, 4]` for an even fit
/// without constant term. Returns the coefficients in the same order.
pub fn fit_monomials(x: &[f64], y: &[f64], powers: &[i32]) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() < powers.len() {
        return Err(Error::Dimension("not enough samples for monomial fit".into()));
    }
    let a = DMatrix::from_fn(x.len(), powers.len(), |i, j| x[i].powi(powers[j]));
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let c = svd.solve(&b, 1e-14).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(c.iter().copied().collect())
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}
