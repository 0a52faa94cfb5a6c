//! Adaptive Dormand-Prince 5(4) integration with a step observer.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h0: 1e-3, h_max: f64::INFINITY, max_steps: 1_000_000 }
    }
}

/// One accepted step, handed to the observer for dense output or events.
pub struct Step<'a> {
    pub t0: f64,
    pub y0: &'a [f64],
    pub f0: &'a [f64],
    pub t1: f64,
    pub y1: &'a [f64],
    pub f1: &'a [f64],
}

impl Step<'_> {
    /// Cubic Hermite interpolation of component `k` at `t`.
    pub fn hermite(&self, k: usize, t: f64) -> f64 {
        hermite(self.t0, self.y0[k], self.f0[k], self.t1, self.y1[k], self.f1[k], t)
    }
}

pub fn hermite(t0: f64, y0: f64, d0: f64, t1: f64, y1: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// The observer sees every accepted step and may return `false` to stop early;
/// the returned pair is the last accepted `(t, y)`.
pub fn integrate<F, O>(
    f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<(f64, Vec<f64>)>
where
    F: Fn(f64, &[f64], &mut [f64]),
    O: FnMut(&Step) -> bool,
{
    let n = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok((t0, y0.to_vec()));
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    f(t, &y, &mut k[0]);
    let mut h = opts.h0.min(span).min(opts.h_max);
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut steps = 0usize;
    loop {
        if steps >= opts.max_steps {
            return Err(Error::NonConvergence(format!("ode step budget exhausted at t={t}")));
        }
        steps += 1;
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = dir * h;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += hs * A[s][j] * kj[i];
                }
                ytmp[i] = acc;
            }
            f(t + C[s] * hs, &ytmp, &mut k[s]);
        }
        ynew.copy_from_slice(&ytmp);
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err = err.max((hs * e / sc).abs());
        }
        if !err.is_finite() {
            h *= 0.1;
            if h < 1e-14 * span {
                return Err(Error::Numerical(format!("non-finite ode state near t={t}")));
            }
            continue;
        }
        if err <= 1.0 {
            let tn = if last { t1 } else { t + hs };
            let fnew = k[6].clone();
            let keep = observer(&Step { t0: t, y0: &y, f0: &k[0], t1: tn, y1: &ynew, f1: &fnew });
            t = tn;
            y.copy_from_slice(&ynew);
            k[0] = fnew;
            if last || !keep {
                return Ok((t, y));
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).min(opts.h_max);
        if h < 1e-14 * span.max(1.0) {
            return Err(Error::Numerical(format!("ode step underflow at t={t}")));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_backward_and_forward() {
        let opts = OdeOptions { rtol: 1e-11, atol: 1e-13, ..Default::default() };
        let (_, y) = integrate(|_, y, d| d[0] = -y[0], 0.0, &[1.0], 3.0, &opts, |_| true).unwrap();
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-10);
        let (_, y) = integrate(|_, y, d| d[0] = -y[0], 3.0, &[1.0], 0.0, &opts, |_| true).unwrap();
        assert!((y[0] - 3.0f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn harmonic_oscillator_and_hermite_event() {
        let opts = OdeOptions { rtol: 1e-11, atol: 1e-13, ..Default::default() };
        let mut crossing = None;
        integrate(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            3.0,
            &opts,
            |s| {
                if s.y0[0] > 0.0 && s.y1[0] <= 0.0 {
                    let (mut lo, mut hi) = (s.t0, s.t1);
                    for _ in 0..60 {
                        let m = 0.5 * (lo + hi);
                        if s.hermite(0, m) > 0.0 {
                            lo = m;
                        } else {
                            hi = m;
                        }
                    }
                    crossing = Some(0.5 * (lo + hi));
                    return false;
                }
                true
            },
        )
        .unwrap();
        assert!((crossing.unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    }
}
