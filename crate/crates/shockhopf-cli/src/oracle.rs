//! Independent brute-force reference for the normal-form branch.

use shockhopf::bifurcation::HopfNormalForm;
use shockhopf::error::{Error, Result};
use shockhopf::numerics::ode::{integrate, OdeOptions};

/// `ε(a)` of the planar normal form: integrate the Cartesian field from
/// `(a, 0)` to the next upward crossing of `y = 0` with `x > 0`, then Newton
/// in `ε` on `P(ε) = a`.
pub fn normal_form_oracle(nf: &HopfNormalForm, a: f64) -> Result<f64> {
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-16, h0: 1e-3, h_max: 0.05, max_steps: 1_000_000 };
    let (sigma, w) = (nf.cubic, nf.frequency);
    let period = nf.period();
    let rhs = move |eps: f64| {
        move |_t: f64, y: &[f64], dy: &mut [f64]| {
            let r2 = y[0] * y[0] + y[1] * y[1];
            dy[0] = eps * y[0] - w * y[1] + sigma * y[0] * r2;
            dy[1] = w * y[0] + eps * y[1] + sigma * y[1] * r2;
        }
    };
    let poincare = |eps: f64| -> Result<f64> {
        let mut bracket = None;
        integrate(rhs(eps), 0.0, &[a, 0.0], 1.5 * period, &opts, |s| {
            if s.t0 > 0.5 * period && s.y0[1] < 0.0 && s.y1[1] >= 0.0 && s.y1[0] > 0.0 {
                bracket = Some((s.t0, s.y0.to_vec(), s.t1));
                return false;
            }
            true
        })?;
        let (t0, y0, t1) = bracket.ok_or_else(|| Error::Numerical(format!("no section crossing at a = {a}")))?;
        let at = |t: f64| integrate(rhs(eps), t0, &y0, t, &opts, |_| true).map(|r| r.1);
        // secant on y(t) = 0 inside the bracketing step
        let (mut ta, mut tb) = (t0, t1);
        let (mut ya, mut yb) = (y0[1], at(t1)?[1]);
        for _ in 0..60 {
            if yb.abs() < 1e-17 || ya == yb {
                break;
            }
            let tn = tb - yb * (tb - ta) / (yb - ya);
            (ta, ya) = (tb, yb);
            tb = tn;
            yb = at(tb)?[1];
        }
        Ok(at(tb)?[0])
    };
    let mut eps = -sigma * a * a * 0.9;
    let mut step = f64::INFINITY;
    for _ in 0..30 {
        let f = poincare(eps)? - a;
        let h = 1e-7;
        let df = (poincare(eps + h)? - poincare(eps - h)?) / (2.0 * h);
        step = f / df;
        eps -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    // the finite-difference slope limits the last steps to roundoff level
    if step.abs() <= 1e-9 * eps.abs().max(1e-12) {
        Ok(eps)
    } else {
        Err(Error::NonConvergence(format!("normal-form oracle Newton at a = {a}, last step {step:e}")))
    }
}
