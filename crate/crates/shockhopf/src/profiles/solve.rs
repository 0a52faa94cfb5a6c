use super::{decay_rate, real_eigensystem, Flux, ShockProfile, PROFILE_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::numerics::band::BandMatrix;
use crate::numerics::ode::{integrate, OdeOptions};
use crate::spaces::{Grid1D, GridFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileMethod {
    /// Shooting with collocation fallback.
    Auto,
    Shooting,
    Collocation,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub method: ProfileMethod,
    pub rtol: f64,
    pub atol: f64,
    /// Seed distance from the endstate, relative to the jump size.
    pub seed: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { method: ProfileMethod::Auto, rtol: 1e-12, atol: 1e-14, seed: 1e-9 }
    }
}

struct Setup<'a> {
    flux: &'a dyn Flux,
    eps: f64,
    um: Vec<f64>,
    up: Vec<f64>,
    fm: Vec<f64>,
    comp: usize,
    phase: f64,
}

impl Setup<'_> {
    fn rhs(&self, u: &[f64], out: &mut [f64]) {
        let f = self.flux.flux(self.eps, u);
        for (o, (a, b)) in out.iter_mut().zip(f.iter().zip(&self.fm)) {
            *o = a - b;
        }
    }
}

/// Solves the standing-wave ODE on `grid` with `ū_k(0) = phase`, where `k` is
/// the first component that jumps. `phase = None` picks the midpoint.
pub fn solve_profile(flux: &dyn Flux, eps: f64, grid: Grid1D, phase: Option<f64>) -> Result<ShockProfile> {
    solve_profile_with(flux, eps, grid, phase, &SolveOptions::default())
}

pub fn solve_profile_collocation(
    flux: &dyn Flux,
    eps: f64,
    grid: Grid1D,
    phase: Option<f64>,
) -> Result<ShockProfile> {
    let opts = SolveOptions { method: ProfileMethod::Collocation, ..Default::default() };
    solve_profile_with(flux, eps, grid, phase, &opts)
}

pub fn solve_profile_with(
    flux: &dyn Flux,
    eps: f64,
    grid: Grid1D,
    phase: Option<f64>,
    opts: &SolveOptions,
) -> Result<ShockProfile> {
    let n = flux.dim();
    let (um, up) = flux.endstates(eps);
    let jump: f64 = um.iter().zip(&up).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if jump < 1e-14 {
        let values = GridFunction::new(grid, n, um.repeat(grid.len()))?;
        return Ok(ShockProfile {
            schema_version: PROFILE_SCHEMA_VERSION,
            flux_name: flux.name(),
            eps,
            u_minus: um.clone(),
            u_plus: up,
            derivative: GridFunction::zeros(grid, n),
            values,
            decay_rate: None,
            phase: phase.unwrap_or(0.0),
            tolerance: opts.rtol,
            method: "constant".into(),
        });
    }
    for (name, u) in [("u-", &um), ("u+", &up)] {
        let eig = flux.jacobian(eps, u).complex_eigenvalues();
        if let Some(z) = eig.iter().find(|z| z.re.abs() <= 1e-10) {
            return Err(Error::SpectralAssumption(format!("non-hyperbolic rest point {name}: eigenvalue {z}")));
        }
    }
    let comp = (0..n).find(|&c| (um[c] - up[c]).abs() > 1e-12 * jump).unwrap_or(0);
    let phase = phase.unwrap_or(0.5 * (um[comp] + up[comp]));
    let lo = um[comp].min(up[comp]);
    let hi = um[comp].max(up[comp]);
    if !(phase > lo && phase < hi) {
        return Err(Error::Argument(format!("phase {phase} outside the open range ({lo}, {hi})")));
    }
    let fm = flux.flux(eps, &um);
    let setup = Setup { flux, eps, um, up, fm, comp, phase };
    let values = match opts.method {
        ProfileMethod::Shooting => shoot(&setup, grid, opts)?,
        ProfileMethod::Collocation => collocate(&setup, grid)?,
        ProfileMethod::Auto => match shoot(&setup, grid, opts) {
            Ok(v) => v,
            Err(Error::NoConnection(_)) | Err(Error::Numerical(_)) | Err(Error::NonConvergence(_)) => {
                collocate(&setup, grid)?
            }
            Err(e) => return Err(e),
        },
    };
    let (vals, method) = values;
    let mut deriv = vec![0.0; vals.len()];
    for i in 0..grid.len() {
        setup.rhs(&vals[i * n..(i + 1) * n], &mut deriv[i * n..(i + 1) * n]);
    }
    let mut profile = ShockProfile {
        schema_version: PROFILE_SCHEMA_VERSION,
        flux_name: flux.name(),
        eps,
        u_minus: setup.um.clone(),
        u_plus: setup.up.clone(),
        values: GridFunction::new(grid, n, vals)?,
        derivative: GridFunction::new(grid, n, deriv)?,
        decay_rate: None,
        phase,
        tolerance: opts.rtol,
        method: method.into(),
    };
    profile.decay_rate = decay_rate(&profile).ok();
    Ok(profile)
}

fn shoot(s: &Setup, grid: Grid1D, opts: &SolveOptions) -> Result<(Vec<f64>, &'static str)> {
    let n = s.flux.dim();
    let a_minus = s.flux.jacobian(s.eps, &s.um);
    let a_plus = s.flux.jacobian(s.eps, &s.up);
    let unstable: Vec<(f64, Vec<f64>)> =
        real_eigensystem(&a_minus)?.into_iter().filter(|(l, _)| *l > 0.0).collect();
    let stable: Vec<(f64, Vec<f64>)> =
        real_eigensystem(&a_plus)?.into_iter().filter(|(l, _)| *l < 0.0).collect();
    // forward from u₋ along a one-dimensional unstable manifold, else backward
    // from u₊ along a one-dimensional stable manifold
    let (dir, start, other, (sigma, r)) = if unstable.len() == 1 {
        (1.0, &s.um, &s.up, unstable[0].clone())
    } else if stable.len() == 1 {
        (-1.0, &s.up, &s.um, stable[0].clone())
    } else {
        return Err(Error::NoConnection("no one-dimensional manifold to shoot along".into()));
    };
    let k = s.comp;
    let sign = if r[k] * (other[k] - start[k]) > 0.0 { 1.0 } else { -1.0 };
    let jump: f64 = s.um.iter().zip(&s.up).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let delta = opts.seed * jump * sign;
    // integrate the deviation w = u − start so tolerances resolve the tail
    let fs = s.flux.flux(s.eps, start);
    let offset: Vec<f64> = fs.iter().zip(&s.fm).map(|(a, b)| a - b).collect();
    let f = |_: f64, w: &[f64], d: &mut [f64]| {
        let u: Vec<f64> = start.iter().zip(w).map(|(a, b)| a + b).collect();
        let fu = s.flux.flux(s.eps, &u);
        for c in 0..n {
            d[c] = (fu[c] - fs[c]) + offset[c];
        }
    };
    let seed: Vec<f64> = r.iter().map(|v| delta * v).collect();
    let ode = OdeOptions { rtol: opts.rtol, atol: opts.atol * opts.seed, h0: 1e-2, ..Default::default() };
    let target = s.phase - start[k];

    let side0 = seed[k] - target;
    let reach = dir * (50.0 / sigma.abs() + 4.0 * grid.half_width());
    let mut event: Option<(f64, f64, Vec<f64>)> = None;
    integrate(f, 0.0, &seed, reach, &ode, |st| {
        if (st.y1[k] - target) * side0 <= 0.0 {
            let (mut a, mut b) = (st.t0, st.t1);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if (st.hermite(k, m) - target) * side0 > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            event = Some((0.5 * (a + b), st.t0, st.y0.to_vec()));
            return false;
        }
        true
    })?;
    let (t_guess, t_step, w_step) =
        event.ok_or_else(|| Error::NoConnection("trajectory never reaches the phase value".into()))?;
    // Newton polish of the crossing with exact re-integration from the step start
    let mut tc = t_guess;
    for _ in 0..8 {
        let (_, w) = integrate(f, t_step, &w_step, tc, &ode, |_| true)?;
        let mut d = vec![0.0; n];
        f(tc, &w, &mut d);
        if d[k].abs() < 1e-300 {
            break;
        }
        let dt = (w[k] - target) / d[k];
        tc -= dt;
        if dt.abs() < 1e-15 * (1.0 + tc.abs()) {
            break;
        }
    }
    // profile coordinate ξ = t − tc; the seed sits at ξ_s
    let xi_s = -tc;
    let nodes = grid.nodes();
    let mut dev = vec![f64::NAN; grid.len() * n];
    let set = |dev: &mut Vec<f64>, i: usize, w: &[f64]| dev[i * n..(i + 1) * n].copy_from_slice(w);

    // seed side, ordered from the seed inwards; beyond the seed use the
    // linear asymptotics
    let seed_side: Vec<usize> = if dir > 0.0 {
        (0..grid.len()).filter(|&i| nodes[i] <= 0.0).collect()
    } else {
        (0..grid.len()).rev().filter(|&i| nodes[i] >= 0.0).collect()
    };
    let mut cur_t = xi_s;
    let mut cur_w = seed.clone();
    for &i in &seed_side {
        let x = nodes[i];
        if (x - xi_s) * dir < 0.0 {
            let e = (sigma * (x - xi_s)).exp();
            let w: Vec<f64> = r.iter().map(|v| delta * v * e).collect();
            set(&mut dev, i, &w);
        } else {
            let (t, w) = integrate(f, cur_t, &cur_w, x, &ode, |_| true)?;
            cur_t = t;
            cur_w = w;
            set(&mut dev, i, &cur_w);
        }
    }
    // far side: continue from the centre node away from the seed
    let c = grid.center();
    let mut cur_w = dev[c * n..(c + 1) * n].to_vec();
    let mut cur_t = 0.0;
    let far: Vec<usize> = if dir > 0.0 { (c + 1..grid.len()).collect() } else { (0..c).rev().collect() };
    let ode_far = OdeOptions { atol: opts.atol, ..ode };
    for i in far {
        let (t, w) = integrate(f, cur_t, &cur_w, nodes[i], &ode_far, |_| true)?;
        cur_t = t;
        cur_w = w;
        set(&mut dev, i, &cur_w);
    }
    let vals: Vec<f64> = dev.iter().enumerate().map(|(j, w)| start[j % n] + w).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite profile samples".into()));
    }
    Ok((vals, "shooting"))
}

/// Damped Newton on the trapezoid discretization with projective boundary
/// conditions and a phase row; second-order accurate in `h`.
fn collocate(s: &Setup, grid: Grid1D) -> Result<(Vec<f64>, &'static str)> {
    let n = s.flux.dim();
    let m = grid.len();
    let h = grid.h();
    let c = grid.center();
    let left_rows: Vec<Vec<f64>> = real_eigensystem(&s.flux.jacobian(s.eps, &s.um).transpose())?
        .into_iter()
        .filter(|(l, _)| *l < 0.0)
        .map(|(_, v)| v)
        .collect();
    let right_rows: Vec<Vec<f64>> = real_eigensystem(&s.flux.jacobian(s.eps, &s.up).transpose())?
        .into_iter()
        .filter(|(l, _)| *l > 0.0)
        .map(|(_, v)| v)
        .collect();
    let nl = left_rows.len();
    if nl + right_rows.len() + 1 != n {
        return Err(Error::SpectralAssumption("boundary conditions do not close the collocation system".into()));
    }
    let nodes = grid.nodes();
    let mut u: Vec<f64> = Vec::with_capacity(m * n);
    for x in &nodes {
        let w = 0.5 * (1.0 + (0.5 * x).tanh());
        for k in 0..n {
            u.push(s.um[k] + (s.up[k] - s.um[k]) * w);
        }
    }
    let interval_row = |i: usize| nl + n * i + usize::from(i >= c);
    let residual = |u: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; m * n];
        for (j, row) in left_rows.iter().enumerate() {
            r[j] = (0..n).map(|k| row[k] * (u[k] - s.um[k])).sum();
        }
        let mut g0 = vec![0.0; n];
        let mut g1 = vec![0.0; n];
        for i in 0..m - 1 {
            s.rhs(&u[i * n..(i + 1) * n], &mut g0);
            s.rhs(&u[(i + 1) * n..(i + 2) * n], &mut g1);
            let r0 = interval_row(i);
            for k in 0..n {
                r[r0 + k] = u[(i + 1) * n + k] - u[i * n + k] - 0.5 * h * (g0[k] + g1[k]);
            }
        }
        r[nl + n * c] = u[c * n + s.comp] - s.phase;
        let base = nl + n * (m - 1) + 1;
        for (j, row) in right_rows.iter().enumerate() {
            r[base + j] = (0..n).map(|k| row[k] * (u[(m - 1) * n + k] - s.up[k])).sum();
        }
        r
    };
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let band = 3 * n + 2;
    let mut r = residual(&u);
    for _ in 0..60 {
        if norm(&r) < 1e-12 {
            return Ok((u, "collocation"));
        }
        let mut jac = BandMatrix::<f64>::zeros(m * n, band, band);
        for (j, row) in left_rows.iter().enumerate() {
            for k in 0..n {
                jac.set(j, k, row[k]);
            }
        }
        for i in 0..m - 1 {
            let a0 = s.flux.jacobian(s.eps, &u[i * n..(i + 1) * n]);
            let a1 = s.flux.jacobian(s.eps, &u[(i + 1) * n..(i + 2) * n]);
            let r0 = interval_row(i);
            for p in 0..n {
                for q in 0..n {
                    let id = if p == q { 1.0 } else { 0.0 };
                    jac.set(r0 + p, i * n + q, -id - 0.5 * h * a0[(p, q)]);
                    jac.set(r0 + p, (i + 1) * n + q, id - 0.5 * h * a1[(p, q)]);
                }
            }
        }
        jac.set(nl + n * c, c * n + s.comp, 1.0);
        let base = nl + n * (m - 1) + 1;
        for (j, row) in right_rows.iter().enumerate() {
            for k in 0..n {
                jac.set(base + j, (m - 1) * n + k, row[k]);
            }
        }
        let du = jac.factor()?.solve(&r);
        let r0 = norm(&r);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, d)| a - lambda * d).collect();
            let rt = residual(&trial);
            if norm(&rt) < r0 || lambda < 1e-4 {
                u = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    Err(Error::NonConvergence(format!("collocation Newton stalled at residual {:e}", norm(&r))))
}

/// Largest one-step mismatch `|Φ_h(ū_i) − ū_{i+1}|/h` of the ODE flow map
/// between neighboring nodes; an ODE residual independent of how the samples
/// were produced.
pub fn ode_residual(profile: &ShockProfile, flux: &dyn Flux) -> Result<f64> {
    let n = profile.dim();
    let g = profile.grid();
    let h = g.h();
    let fm = flux.flux(profile.eps, &profile.u_minus);
    let f = |_: f64, y: &[f64], d: &mut [f64]| {
        let fy = flux.flux(profile.eps, y);
        for k in 0..n {
            d[k] = fy[k] - fm[k];
        }
    };
    let ode = OdeOptions { rtol: 1e-13, atol: 1e-15, h0: h, ..Default::default() };
    let mut worst = 0.0f64;
    for i in 0..g.len() - 1 {
        let (_, y) = integrate(f, 0.0, profile.state(i), h, &ode, |_| true)?;
        let next = profile.state(i + 1);
        let e = y.iter().zip(next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(e / h);
    }
    Ok(worst)
}
