use super::Continuization;
use crate::error::{Error, Result};
use crate::kernels::{default_norm_grid, fit_norm_law, kernel_derivative, kernel_norm, ModelKernel, NormLaw};
use crate::numerics::fit::{fit_power_law, logspace, LineFit};
use crate::spaces::{l2, Grid1D, GridFunction, NormKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `∫_{t0}^{t1} f(t) dt` by composite Simpson in `s = √t`, with steps fine
/// enough to resolve a Gaussian of width `2√t` moving at speed `a`.
pub fn time_quadrature(t0: f64, t1: f64, a: f64, f: impl Fn(f64) -> f64) -> f64 {
    if t1 <= t0 {
        return 0.0;
    }
    let (s0, s1) = (t0.sqrt(), t1.sqrt());
    let ds_max = 1.0 / (32.0 * a.abs().max(1.0));
    let mut m = ((s1 - s0) / ds_max).ceil() as usize;
    m = (m + m % 2).max(2);
    let ds = (s1 - s0) / m as f64;
    let g = |s: f64| 2.0 * s * f(s * s);
    let mut acc = g(s0) + g(s1);
    for i in 1..m {
        let s = s0 + i as f64 * ds;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(s);
    }
    acc * ds / 3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveSeries {
    /// `‖∂_y^α G(·,jT;y)‖_{B1}`, `j = 1..=N`.
    pub norms: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// `log₂((S(4M) − S(2M))/(S(2M) − S(M)))` with `M = N/4`.
    pub growth_exponent: f64,
    /// Plain log-log fit of the cumulative sums, biased by the constant term.
    pub fit: LineFit,
}

/// Cumulative `Σ_{j≤N'} ‖∂_y^α G(·,jT;y)‖_{B1}` and its growth rate.
pub fn naive_sum_norms(k: &ModelKernel, alpha: usize, period: f64, count: usize) -> Result<NaiveSeries> {
    if period < 1.0 || count < 16 {
        return Err(Error::Argument(format!("naive sums need T >= 1 and N >= 16, got T={period}, N={count}")));
    }
    let norms: Result<Vec<f64>> = (1..=count)
        .into_par_iter()
        .map(|j| kernel_norm(k, alpha, 0, NormKind::B1, j as f64 * period, None))
        .collect();
    let norms = norms?;
    let mut cumulative = Vec::with_capacity(count);
    let mut acc = 0.0;
    for v in &norms {
        acc += v;
        cumulative.push(acc);
    }
    let m = count / 4;
    let s = |n: usize| cumulative[n - 1];
    let growth_exponent = ((s(4 * m) - s(2 * m)) / (s(2 * m) - s(m))).log2();
    let ns: Vec<f64> = (1..=count).map(|n| n as f64).collect();
    let fit = fit_power_law(&ns, &cumulative)?;
    Ok(NaiveSeries { norms, cumulative, growth_exponent, fit })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyEnvelope {
    pub counts: Vec<usize>,
    /// `‖Σ_{j=N}^{2N−1} ∂_y G(·,jT;y)‖_{B1}`.
    pub increments: Vec<f64>,
    pub fit: LineFit,
}

/// Dyadic blocks of the signed series `Σ_j K_y(·,jT;y)`, whose cancellation
/// makes them decay like `(NT)^{−1/4}` although the norms sum to infinity.
pub fn cauchy_envelope(k: &ModelKernel, period: f64, counts: &[usize]) -> Result<CauchyEnvelope> {
    let a = k.speed();
    let increments: Result<Vec<f64>> = counts
        .par_iter()
        .map(|&n| {
            let nt = n as f64 * period;
            // centers y + a·jT for j = N..2N−1, placed symmetrically about 0
            let y = -a * period * (3 * n - 1) as f64 / 2.0;
            let grid = if k.is_excited() {
                default_norm_grid(k, nt)
            } else {
                let half = a.abs() * period * (n - 1) as f64 / 2.0 + 12.0 * (2.0 * nt).sqrt();
                Grid1D::with_spacing(half, 0.2 * nt.sqrt())?
            };
            let vals: Result<Vec<f64>> = grid
                .nodes()
                .iter()
                .map(|&x| {
                    let mut s = 0.0;
                    for j in n..2 * n {
                        s += kernel_derivative(k, 1, 0, x, j as f64 * period, y)?;
                    }
                    Ok(s)
                })
                .collect();
            Ok(l2(&vals?, &grid))
        })
        .collect();
    let increments = increments?;
    let ns: Vec<f64> = counts.iter().map(|n| *n as f64).collect();
    let fit = fit_power_law(&ns, &increments)?;
    Ok(CauchyEnvelope { counts: counts.to_vec(), increments, fit })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailMode {
    /// Integrate `∂_y G` directly.
    Raw,
    /// `K_y = a⁻¹(K_t − K_yy)`: boundary terms plus an absolutely
    /// convergent integral. `J` tails are absolutely convergent as they stand.
    Cancelled,
}

/// Time after which the kernel is below `e^{−36}` relative on the window.
fn window_exit_time(k: &ModelKernel, grid: &Grid1D, y: f64) -> f64 {
    let a = k.speed().abs();
    let dist = if k.is_excited() { y.abs() } else { grid.half_width() + y.abs() };
    let r = (12.0 + (144.0 + 4.0 * a * dist).sqrt()) / (2.0 * a);
    r * r
}

/// Column `x ↦ ∫_T^U ∂_y G(x,t;y) dt`; `upper = None` means `U = ∞`, which on
/// a finite window is reached once the kernel has left it.
pub fn resummed_tail(
    k: &ModelKernel,
    period: f64,
    upper: Option<f64>,
    mode: TailMode,
    grid: &Grid1D,
    y: f64,
) -> Result<GridFunction> {
    if period <= 0.0 {
        return Err(Error::Domain(format!("tail needs T > 0, got {period}")));
    }
    let u = match (upper, mode) {
        (None, TailMode::Raw) => {
            return Err(Error::Argument(
                "raw tail to t = ∞ is not absolutely convergent; use the cancelled mode".into(),
            ))
        }
        (None, _) => window_exit_time(k, grid, y).max(period),
        (Some(u), _) if u < period => return Err(Error::Argument(format!("upper limit {u} below T = {period}"))),
        (Some(u), _) => u,
    };
    let a = k.speed();
    let cancelled = mode == TailMode::Cancelled && !k.is_excited();
    let vals: Result<Vec<f64>> = grid
        .nodes()
        .par_iter()
        .map(|&x| {
            let d = |al: usize, t: f64| kernel_derivative(k, al, 0, x, t, y).unwrap_or(f64::NAN);
            let v = if cancelled {
                let boundary = (d(0, u) - d(0, period)) / a;
                boundary - time_quadrature(period, u, a, |t| d(2, t)) / a
            } else {
                time_quadrature(period, u, a, |t| d(1, t))
            };
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Numerical(format!("non-finite tail value at x = {x}")))
            }
        })
        .collect();
    GridFunction::new(*grid, 1, vals?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuizationReport {
    pub order: Continuization,
    pub period: f64,
    pub counts: Vec<usize>,
    /// `‖∂_yθ_N‖_{B1}` with `θ_N = Σ_{j=1}^N K(jT) − T⁻¹∫_T^{NT} K dt`.
    pub theta_norms: Vec<f64>,
    /// `θ_N` minus the endpoint correction of the chosen order.
    pub remainder_norms: Vec<f64>,
    /// `‖r_{N'} − r_N‖_{B1}` between consecutive counts.
    pub remainder_increments: Vec<f64>,
    /// Fit of the remainder integrand `‖K_{y t^p}‖_{B1}` over `[T, 1000T]`,
    /// `p = 1, 2, 4` for none, trapezoid and Simpson order.
    pub integrand_law: NormLaw,
    /// `∫_{NT}^∞ ‖K_{y t^p}‖_{B1} dt` per count.
    pub tail_integrals: Vec<f64>,
    pub tail_law: LineFit,
}

/// Error of replacing `Σ_j K(·,jT;y)` by `T⁻¹∫K dt`, for counts `8, 16, …, N`.
///
/// The trapezoid correction is `½(f(T) + f(NT))`; the fourth-order one adds
/// the Euler-Maclaurin term `(T/12)(f′(NT) − f′(T))` with exact `K_yt`, which
/// leaves a remainder controlled by `∫|K_ytttt|`.
pub fn continuization_error(
    k: &ModelKernel,
    period: f64,
    count: usize,
    order: Continuization,
) -> Result<ContinuizationReport> {
    if count < 8 {
        return Err(Error::Argument(format!("continuization needs N >= 8, got {count}")));
    }
    if k.is_excited() {
        return Err(Error::Argument("continuization error is defined for scattering kernels".into()));
    }
    let a = k.speed();
    let mut counts = vec![8usize];
    while counts.last().unwrap() * 2 <= count {
        counts.push(counts.last().unwrap() * 2);
    }
    let n_max = *counts.last().unwrap();
    let y = -a * period * (n_max + 1) as f64 / 2.0;
    let half = a.abs() * period * (n_max - 1) as f64 / 2.0 + 12.0 * (n_max as f64 * period).sqrt();
    let grid = Grid1D::with_spacing(half, 0.25 * period.sqrt())?;
    let nc = counts.len();
    // per node: (θ_N, r_N) at each checkpoint
    let cols: Vec<Vec<(f64, f64)>> = grid
        .nodes()
        .par_iter()
        .map(|&x| {
            let f = |al: usize, be: usize, t: f64| kernel_derivative(k, al, be, x, t, y).unwrap_or(f64::NAN);
            let mut out = Vec::with_capacity(nc);
            let (mut disc, mut int) = (0.0, 0.0);
            let mut next = 0;
            for j in 1..=n_max {
                let t = j as f64 * period;
                disc += f(1, 0, t);
                if j > 1 {
                    int += time_quadrature(t - period, t, a, |s| f(1, 0, s)) / period;
                }
                if j == counts[next] {
                    let theta = disc - int;
                    let corr = match order {
                        Continuization::None => 0.0,
                        Continuization::Trapezoid => 0.5 * (f(1, 0, period) + f(1, 0, t)),
                        Continuization::Simpson => {
                            0.5 * (f(1, 0, period) + f(1, 0, t)) + period / 12.0 * (f(1, 1, t) - f(1, 1, period))
                        }
                    };
                    out.push((theta, theta - corr));
                    next += 1;
                }
            }
            out
        })
        .collect();
    let column = |c: usize, pick: fn(&(f64, f64)) -> f64| -> Vec<f64> { cols.iter().map(|v| pick(&v[c])).collect() };
    let mut theta_norms = Vec::with_capacity(nc);
    let mut remainder_norms = Vec::with_capacity(nc);
    let mut remainder_increments = Vec::with_capacity(nc.saturating_sub(1));
    for c in 0..nc {
        theta_norms.push(l2(&column(c, |p| p.0), &grid));
        let r = column(c, |p| p.1);
        remainder_norms.push(l2(&r, &grid));
        if c > 0 {
            let prev = column(c - 1, |p| p.1);
            let d: Vec<f64> = r.iter().zip(&prev).map(|(p, q)| p - q).collect();
            remainder_increments.push(l2(&d, &grid));
        }
    }
    if theta_norms.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite continuization column".into()));
    }
    let p = match order {
        Continuization::None => 1,
        Continuization::Trapezoid => 2,
        Continuization::Simpson => 4,
    };
    let integrand_law = fit_norm_law(k, 1, p, NormKind::B1, &logspace(period, 1000.0 * period, 13), None)?;
    let tail_integrals = tail_norm_integrals(k, p, period, &counts)?;
    let ts: Vec<f64> = counts.iter().map(|n| *n as f64 * period).collect();
    let tail_law = fit_power_law(&ts, &tail_integrals)?;
    Ok(ContinuizationReport {
        order,
        period,
        counts,
        theta_norms,
        remainder_norms,
        remainder_increments,
        integrand_law,
        tail_integrals,
        tail_law,
    })
}

/// `∫_{NT}^∞ ‖K_{y t^p}(·,t)‖_{B1} dt` for each count, by Simpson in `ln t`
/// to `e^{12}` times the largest start and a power-law closure beyond.
fn tail_norm_integrals(k: &ModelKernel, p: usize, period: f64, counts: &[usize]) -> Result<Vec<f64>> {
    let du = 0.02;
    let u0 = (counts[0] as f64 * period).ln();
    let u_end = (*counts.last().unwrap() as f64 * period).ln() + 12.0;
    let m = ((u_end - u0) / du).round() as usize;
    let us: Vec<f64> = (0..=m).map(|i| u0 + i as f64 * du).collect();
    let g: Result<Vec<f64>> =
        us.par_iter().map(|u| Ok(kernel_norm(k, 1, p, NormKind::B1, u.exp(), None)? * u.exp())).collect();
    let g = g?;
    // local exponent at the far end closes the integral analytically
    let slope = (g[m].ln() - g[m - 1].ln()) / du;
    let closure = if slope < 0.0 { g[m] / -slope } else { f64::INFINITY };
    let mut out = Vec::with_capacity(counts.len());
    for &n in counts {
        let start = (((n as f64 * period).ln() - u0) / du).round() as usize;
        let pts = &g[start..];
        let mut acc = closure;
        for w in pts.windows(2) {
            acc += 0.5 * du * (w[0] + w[1]);
        }
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_quadrature_of_powers() {
        let v = time_quadrature(1.0, 16.0, -1.0, |t| t.powf(-1.5));
        assert!((v - 1.5).abs() < 1e-6, "{v}");
    }
}
