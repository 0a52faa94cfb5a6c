use crate::error::{Error, Result};
use crate::numerics::roots::golden_min;
use crate::profiles::ShockProfile;
use crate::resummation::derivative;
use crate::spaces::{norm, Grid1D, GridFunction, NormKind};
use serde::{Deserialize, Serialize};

/// `Φ(c,a,b) = (a, b(·+c) + ū(·+c) − ū)`: translation of the full state
/// `ū + b` by `c`, written in perturbation coordinates. Off-grid values are
/// the end values (the endstates for `ū`).
#[derive(Clone, Debug)]
pub struct TranslationAction {
    grid: Grid1D,
    n: usize,
    profile: Vec<Vec<f64>>,
    slope: Vec<Vec<f64>>,
}

impl TranslationAction {
    pub fn new(profile: &ShockProfile) -> Self {
        let n = profile.dim();
        Self {
            grid: profile.grid(),
            n,
            profile: (0..n).map(|c| profile.values.component(c)).collect(),
            slope: (0..n).map(|c| profile.derivative.component(c)).collect(),
        }
    }

    pub fn apply(&self, c: f64, a: f64, b: &GridFunction) -> Result<(f64, GridFunction)> {
        if b.grid != self.grid || b.n_comp != self.n {
            return Err(Error::Dimension("state does not live on the profile grid".into()));
        }
        if c == 0.0 {
            return Ok((a, b.clone()));
        }
        let db = derivative(b);
        let g = self.grid;
        let mut out = GridFunction::zeros(g, self.n);
        for k in 0..self.n {
            let (bv, dv) = (b.component(k), db.component(k));
            for i in 0..g.len() {
                let x = g.x(i) + c;
                let shifted = g.interp_hermite(&bv, &dv, x) + g.interp_hermite(&self.profile[k], &self.slope[k], x);
                out.values[i * self.n + k] = shifted - self.profile[k][i];
            }
        }
        Ok((a, out))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Translated {
    pub shift: f64,
    pub a: f64,
    pub b: GridFunction,
    /// `|â| + ‖b̂‖_{X1}` at the returned shift.
    pub norm: f64,
    /// `‖b̂‖_{X1}/|â|`, infinite for `â = 0` with `b̂ ≠ 0`.
    pub cone_ratio: f64,
}

/// Minimizes `|â| + ‖b̂‖_{X1}` over shifts in `[−half_bracket, half_bracket]`
/// by golden section, widening the bracket up to three times when the
/// minimum sits on its edge. Ties with `c = 0` resolve to `c = 0`. Fails
/// when the minimizer is not inside the cone `‖b̂‖_{X1} ≤ cone·|â|`.
pub fn quotient_translate(
    action: &TranslationAction,
    a: f64,
    b: &GridFunction,
    cone: f64,
    half_bracket: f64,
) -> Result<Translated> {
    let objective = |c: f64| -> f64 {
        match action.apply(c, a, b) {
            Ok((ah, bh)) => ah.abs() + norm(&bh, NormKind::X1, None).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };
    let f0 = objective(0.0);
    let tol = 1e-4 * action.grid.h();
    let mut w = half_bracket;
    let mut best = None;
    for _ in 0..4 {
        let (c, fc) = golden_min(objective, -w, w, tol);
        if w - c.abs() > 10.0 * tol {
            best = Some((c, fc));
            break;
        }
        w *= 2.0;
    }
    let (mut c, fc) = best.ok_or_else(|| {
        Error::NonConvergence(format!("translation minimum stays on the bracket edge up to half width {}", w / 2.0))
    })?;
    if fc >= f0 - 1e-14 * f0.max(1e-300) {
        c = 0.0;
    }
    let (ah, bh) = action.apply(c, a, b)?;
    let strong = norm(&bh, NormKind::X1, None)?;
    let cone_ratio = if strong == 0.0 { 0.0 } else { strong / ah.abs() };
    if !(cone_ratio <= cone) {
        return Err(Error::SmallnessBox(format!(
            "best translate c = {c} has ‖b‖_X1/|a| = {cone_ratio:e} above the cone constant {cone}"
        )));
    }
    Ok(Translated { shift: c, a: ah, norm: ah.abs() + strong, b: bh, cone_ratio })
}
