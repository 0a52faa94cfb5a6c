use super::family::{assemble_mode_family, transverse_flux_set, ModeStepper, TransverseModeFamily};
use super::field::{CylinderField, PackedLayout, TransverseGrid};
use crate::error::{Error, Result};
use crate::linops::{CrossingDesign, Semigroup};
use crate::profiles::{exemplar, solve_profile, FluxFamily};
use crate::returnmap::system::{clamp_nodes, partial_fraction_inverse, NeutralMode};
use crate::returnmap::{
    find_periodic_orbit, truncation_psi, FlowOptions, LinearStepper, ModelFamily, OrbitOptions, PerturbationModel, PeriodicOrbit,
    PoincareSystem,
};
use crate::spaces::{weighted_sup, Grid1D, GridFunction};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The perturbation equation on `ℝ × T^q` about a planar profile,
/// `u_t = Lu + ∂_{x₁}Q¹ + Σ_j ∂_{x_{j+1}}Q^{j+1}`,
/// `Q^j = −F^j(ū+u) + F^j(ū) + A^j(ū)u`, in the packed mode layout. Products
/// are formed on the transverse samples and truncated back to the cutoff.
#[derive(Clone, Debug)]
pub struct CylinderSystem {
    pub family: TransverseModeFamily,
    pub layout: PackedLayout,
    transverse: TransverseGrid,
    neutral: NeutralMode,
    crossing: usize,
    base_flux: Vec<Vec<f64>>,
    coefficients: Vec<Vec<f64>>,
    slots: Vec<(usize, usize)>,
}

impl CylinderSystem {
    /// `family` must carry a crossing.
    pub fn new(family: TransverseModeFamily) -> Result<Self> {
        let c = family.crossing().ok_or_else(|| Error::Configuration("the mode family has no planted crossing".into()))?;
        let crossing = family.modes().iter().position(|m| *m == c.xi).expect("crossings are planted on the half set");
        let (q, n) = (family.transverse_dim, family.components());
        let layout = PackedLayout::new(n, q, family.xi_max);
        let transverse = TransverseGrid::new(q, family.xi_max)?;
        let real = family.operators()[0].real().expect("the zero mode keeps its real operator");
        let neutral = NeutralMode::new(real)?;
        let profile = family.profile();
        let m = profile.grid().len();
        let eps = family.eps;
        let base_flux = family.flux_set().iter().map(|f| (0..m).flat_map(|i| f.flux(eps, profile.state(i))).collect()).collect();
        let coefficients = family
            .flux_set()
            .iter()
            .map(|f| {
                (0..m)
                    .flat_map(|i| {
                        let a = f.jacobian(eps, profile.state(i));
                        (0..n * n).map(move |rc| a[(rc / n, rc % n)])
                    })
                    .collect()
            })
            .collect();
        let slots = layout.half.iter().map(|xi| (transverse.slot(xi), transverse.slot(&xi.iter().map(|k| -k).collect::<Vec<_>>()))).collect();
        Ok(Self { family, layout, transverse, neutral, crossing, base_flux, coefficients, slots })
    }

    /// The profile of `flux_set[0]` at `ε` (with `phase`), its mode family
    /// up to `xi_max` and the pair of `design` planted at `crossing`.
    pub fn planted(
        flux_set: &[FluxFamily],
        design: &CrossingDesign,
        eps: f64,
        grid: Grid1D,
        xi_max: usize,
        crossing: &[i32],
        phase: Option<f64>,
    ) -> Result<Self> {
        let flux = flux_set.first().ok_or_else(|| Error::Configuration("empty flux set".into()))?;
        let profile = solve_profile(flux.as_ref(), eps, grid, phase)?;
        Self::new(assemble_mode_family(&profile, flux_set, xi_max)?.with_crossing(crossing, design)?)
    }

    pub fn grid(&self) -> Grid1D {
        self.family.grid()
    }

    pub fn transverse_grid(&self) -> &TransverseGrid {
        &self.transverse
    }

    fn h(&self) -> f64 {
        self.grid().h()
    }

    fn mode0(&self, f: &[f64]) -> Vec<f64> {
        self.layout.mode(f, 0).iter().map(|z| z.re).collect()
    }

    fn set_mode0(&self, f: &mut [f64], v: &[f64]) {
        let b = self.layout.block();
        for (i, node) in v.chunks(self.layout.n).enumerate() {
            f[i * b..i * b + node.len()].copy_from_slice(node);
        }
    }

    fn crossing_data(&self) -> &super::family::ModeCrossing {
        self.family.crossing().expect("checked at construction")
    }

    /// Values of node `i` at the transverse samples, `[c][p]`.
    fn node_samples(&self, f: &[f64], i: usize, out: &mut [Vec<Complex64>]) {
        let (n, b) = (self.layout.n, self.layout.block());
        let node = &f[i * b..(i + 1) * b];
        for (c, buf) in out.iter_mut().enumerate() {
            buf.iter_mut().for_each(|z| *z = ZERO);
            buf[self.slots[0].0] = Complex64::new(node[c], 0.0);
            for (k, (s, sm)) in self.slots.iter().enumerate().skip(1) {
                let o = n + 2 * n * (k - 1);
                let z = Complex64::new(node[o + c], node[o + n + c]);
                buf[*s] = z;
                buf[*sm] = z.conj();
            }
            self.transverse.synthesize(buf);
        }
    }

    /// Writes the half-set coefficients of analyzed samples into node `i`.
    fn store_node(&self, f: &mut [f64], i: usize, analyzed: &[Vec<Complex64>]) {
        let (n, b) = (self.layout.n, self.layout.block());
        let node = &mut f[i * b..(i + 1) * b];
        for (c, buf) in analyzed.iter().enumerate() {
            node[c] = buf[self.slots[0].0].re;
            for (k, (s, _)) in self.slots.iter().enumerate().skip(1) {
                let o = n + 2 * n * (k - 1);
                node[o + c] = buf[*s].re;
                node[o + n + c] = buf[*s].im;
            }
        }
    }

    /// `Q^j` per direction in mode form, `[j][(i·H + k)·n + c]`.
    fn q_modes(&self, u: &[f64]) -> Vec<Vec<Complex64>> {
        let (n, b) = (self.layout.n, self.layout.block());
        let m = u.len() / b;
        let hm = self.layout.half.len();
        let p = self.transverse.len();
        let dirs = self.family.flux_set().len();
        let eps = self.family.eps;
        let profile = self.family.profile();
        let mut out = vec![vec![ZERO; m * hm * n]; dirs];
        let mut samples = vec![vec![ZERO; p]; n];
        let mut qs = vec![vec![ZERO; p]; n * dirs];
        let mut state = vec![0.0; n];
        let mut pert = vec![0.0; n];
        for i in 0..m {
            self.node_samples(u, i, &mut samples);
            let ub = profile.state(i);
            for pt in 0..p {
                for c in 0..n {
                    pert[c] = samples[c][pt].re;
                    state[c] = ub[c] + pert[c];
                }
                for (j, flux) in self.family.flux_set().iter().enumerate() {
                    let f = flux.flux(eps, &state);
                    let a = &self.coefficients[j][i * n * n..(i + 1) * n * n];
                    for r in 0..n {
                        let au: f64 = (0..n).map(|c| a[r * n + c] * pert[c]).sum();
                        qs[j * n + r][pt] = Complex64::new(-f[r] + self.base_flux[j][i * n + r] + au, 0.0);
                    }
                }
            }
            for j in 0..dirs {
                for r in 0..n {
                    let buf = &mut qs[j * n + r];
                    self.transverse.analyze(buf);
                    for (k, (s, _)) in self.slots.iter().enumerate() {
                        out[j][(i * hm + k) * n + r] = buf[*s];
                    }
                }
            }
        }
        out
    }

    fn strong_packed(&self, f: &[f64]) -> f64 {
        physical_strong(&self.layout, &self.transverse, &self.grid(), f)
    }
}

fn physical_strong(layout: &PackedLayout, tg: &TransverseGrid, grid: &Grid1D, f: &[f64]) -> f64 {
    let (n, b) = (layout.n, layout.block());
    let m = f.len() / b;
    let p = tg.len();
    let slots: Vec<(usize, usize)> = layout.half.iter().map(|xi| (tg.slot(xi), tg.slot(&xi.iter().map(|k| -k).collect::<Vec<_>>()))).collect();
    let mut buf = vec![ZERO; p];
    let mut modulus = vec![0.0; m];
    let mut sq = vec![0.0; p];
    for i in 0..m {
        let node = &f[i * b..(i + 1) * b];
        if node.iter().all(|v| *v == 0.0) {
            continue;
        }
        sq.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..n {
            buf.iter_mut().for_each(|z| *z = ZERO);
            buf[slots[0].0] = Complex64::new(node[c], 0.0);
            for (k, (s, sm)) in slots.iter().enumerate().skip(1) {
                let o = n + 2 * n * (k - 1);
                let z = Complex64::new(node[o + c], node[o + n + c]);
                buf[*s] = z;
                buf[*sm] = z.conj();
            }
            tg.synthesize(&mut buf);
            sq.iter_mut().zip(&buf).for_each(|(a, z)| *a += z.re * z.re);
        }
        modulus[i] = sq.iter().copied().fold(0.0, f64::max).sqrt();
    }
    weighted_sup(&modulus, grid, 1)
}

struct CylinderStepper<'a> {
    sys: &'a CylinderSystem,
    planar: Semigroup,
    modes: Vec<ModeStepper>,
}

impl LinearStepper for CylinderStepper<'_> {
    fn step(&self, v: &[f64], source: Option<&[f64]>) -> Vec<f64> {
        let sys = self.sys;
        let mut out = vec![0.0; v.len()];
        let s0 = source.map(|s| sys.mode0(s));
        sys.set_mode0(&mut out, &self.planar.substep(2, &sys.mode0(v), s0.as_deref()));
        for (k, st) in self.modes.iter().enumerate().map(|(k, s)| (k + 1, s)) {
            let vk = sys.layout.mode(v, k);
            let sk = source.map(|s| sys.layout.mode(s, k));
            if vk.iter().all(|z| *z == ZERO) && sk.as_ref().is_none_or(|s| s.iter().all(|z| *z == ZERO)) {
                continue;
            }
            sys.layout.set_mode(&mut out, k, &st.step(&vk, sk.as_deref()));
        }
        out
    }
}

impl PerturbationModel for CylinderSystem {
    fn eps(&self) -> f64 {
        self.family.eps
    }

    fn eigenvalue(&self) -> Complex64 {
        self.crossing_data().lambda
    }

    fn zero(&self) -> GridFunction {
        GridFunction::zeros(self.grid(), self.layout.block())
    }

    fn coefficient(&self, f: &[f64]) -> Complex64 {
        let c = self.crossing_data();
        match &c.projectors {
            Some(p) => p.coefficient(&self.mode0(f)),
            None => c.coefficient(&self.layout.mode(f, self.crossing), self.h()),
        }
    }

    fn pi_tilde(&self, f: &[f64]) -> Vec<f64> {
        let c = self.crossing_data();
        let mut out = f.to_vec();
        match &c.projectors {
            Some(p) => self.set_mode0(&mut out, &p.pi_tilde_values(&self.mode0(f))),
            None => {
                let v = self.layout.mode(f, self.crossing);
                let w = c.coefficient(&v, self.h());
                let projected: Vec<Complex64> = v.iter().zip(&c.phi).map(|(x, p)| x - p * w).collect();
                self.layout.set_mode(&mut out, self.crossing, &projected);
            }
        }
        out
    }

    fn compose(&self, w: Complex64, v: &[f64]) -> Vec<f64> {
        let c = self.crossing_data();
        let mut out = v.to_vec();
        if c.projectors.is_some() {
            let m0: Vec<f64> = c.phi.iter().zip(self.mode0(v)).map(|(p, x)| 2.0 * (w * p).re + x).collect();
            self.set_mode0(&mut out, &m0);
        } else {
            let vk: Vec<Complex64> = self.layout.mode(v, self.crossing).iter().zip(&c.phi).map(|(x, p)| x + w * p).collect();
            self.layout.set_mode(&mut out, self.crossing, &vk);
        }
        out
    }

    fn nonlinearity(&self, u: &[f64]) -> Vec<f64> {
        let q = self.q_modes(u);
        let (n, b) = (self.layout.n, self.layout.block());
        let m = u.len() / b;
        let hm = self.layout.half.len();
        let inv = 0.5 / self.h();
        let mut out = vec![0.0; u.len()];
        for (k, xi) in self.layout.half.iter().enumerate() {
            let mut vals = vec![ZERO; m * n];
            for i in 0..m {
                for c in 0..n {
                    let up = if i + 1 < m { q[0][((i + 1) * hm + k) * n + c] } else { ZERO };
                    let dn = if i >= 1 { q[0][((i - 1) * hm + k) * n + c] } else { ZERO };
                    let mut z = (up - dn) * inv;
                    for (j, kj) in xi.iter().enumerate() {
                        if *kj != 0 {
                            z += Complex64::new(0.0, *kj as f64) * q[j + 1][(i * hm + k) * n + c];
                        }
                    }
                    vals[i * n + c] = z;
                }
            }
            self.layout.set_mode(&mut out, k, &vals);
        }
        out
    }

    fn clamp(&self, v: &[f64], bound: f64) -> Option<Vec<f64>> {
        let (n, b) = (self.layout.n, self.layout.block());
        if b == n {
            return clamp_nodes(v, n, bound);
        }
        let m = v.len() / b;
        let p = self.transverse.len();
        let mut out = v.to_vec();
        let mut clamped = false;
        let mut samples = vec![vec![ZERO; p]; n];
        for i in 0..m {
            let node = &v[i * b..(i + 1) * b];
            // |v(x̃)| ≤ |c₀| + 2Σ|c_ξ| per component
            let crude: f64 = (0..n)
                .map(|c| {
                    let s = node[c].abs()
                        + (1..self.layout.half.len()).map(|k| 2.0 * node[n + 2 * n * (k - 1) + c].hypot(node[2 * n * k + c])).sum::<f64>();
                    s * s
                })
                .sum::<f64>()
                .sqrt();
            if crude <= bound {
                continue;
            }
            self.node_samples(v, i, &mut samples);
            let mut touched = false;
            for pt in 0..p {
                let r = samples.iter().map(|s| s[pt].re * s[pt].re).sum::<f64>().sqrt();
                if r > bound {
                    touched = true;
                    let s = truncation_psi(bound / r);
                    samples.iter_mut().for_each(|buf| buf[pt] *= s);
                }
            }
            if touched {
                clamped = true;
                for buf in samples.iter_mut() {
                    buf.iter_mut().for_each(|z| *z = Complex64::new(z.re, 0.0));
                    self.transverse.analyze(buf);
                }
                self.store_node(&mut out, i, &samples);
            }
        }
        clamped.then_some(out)
    }

    fn strong_norm(&self, f: &[f64]) -> f64 {
        self.strong_packed(f)
    }

    fn mass(&self, f: &[f64]) -> Vec<f64> {
        let real = self.family.operators()[0].real().expect("the zero mode keeps its real operator");
        real.mass(&self.mode0(f))
    }

    fn linear_stepper(&self, dt: f64) -> Result<Box<dyn LinearStepper + '_>> {
        let real = self.family.operators()[0].real().expect("the zero mode keeps its real operator");
        let planar = Semigroup::crank_nicolson(real.clone(), dt, 1, None)?;
        let modes = self.family.operators()[1..].iter().map(|op| ModeStepper::new(op.clone(), dt)).collect::<Result<_>>()?;
        Ok(Box::new(CylinderStepper { sys: self, planar, modes }))
    }

    /// The planar mode by partial fractions as in one dimension, the others
    /// by their geometric series, which contract at `e^{−η|ξ|²T}`.
    fn periodic_inverse(&self, t: f64, steps: usize, y: &[f64]) -> Result<Vec<f64>> {
        let c = self.crossing_data();
        let real = self.family.operators()[0].real().expect("the zero mode keeps its real operator");
        let project0 = |f: &[f64]| match &c.projectors {
            Some(p) => p.pi_tilde_values(f),
            None => f.to_vec(),
        };
        let y = self.pi_tilde(y);
        let mut out = vec![0.0; y.len()];
        let y0 = self.neutral.remove(&project0(&self.mode0(&y)));
        let acc = partial_fraction_inverse(real, |r| self.neutral.solve(r), t, steps, &y0)?;
        self.set_mode0(&mut out, &self.neutral.remove(&project0(&acc)));

        let dt = t / steps as f64;
        let grid = self.grid();
        let n = self.layout.n;
        for (k, op) in self.family.operators().iter().enumerate().skip(1) {
            let yk = self.layout.mode(&y, k);
            if yk.iter().all(|z| *z == ZERO) {
                continue;
            }
            let st = ModeStepper::new(op.clone(), dt)?;
            let size = |f: &[Complex64]| {
                let modulus: Vec<f64> = f.chunks(n).map(|z| z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).collect();
                weighted_sup(&modulus, &grid, 1)
            };
            let floor = 1e-16 * size(&yk);
            let mut sum = yk.clone();
            let mut term = yk;
            let mut prev = f64::INFINITY;
            for j in 0.. {
                term = (0..steps).fold(term, |u, _| st.step(&u, None));
                if k == self.crossing {
                    term = self.family.project(op.xi(), &term);
                }
                sum.iter_mut().zip(&term).for_each(|(s, x)| *s += x);
                let s = size(&term);
                if s <= floor {
                    break;
                }
                if s >= prev || j > 500 {
                    return Err(Error::NonConvergence(format!("mode {:?} period map does not contract", op.xi())));
                }
                prev = s;
            }
            if k == self.crossing {
                sum = self.family.project(op.xi(), &sum);
            }
            self.layout.set_mode(&mut out, k, &sum);
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("periodic inverse produced non-finite values".into()));
        }
        Ok(out)
    }
}

/// Flux set, crossing design and cutoff of a cylinder problem on a fixed
/// grid; yields the cylinder system at each `ε`.
#[derive(Clone, Debug)]
pub struct CylinderFamily {
    pub flux_set: Vec<FluxFamily>,
    pub design: CrossingDesign,
    pub grid: Grid1D,
    pub xi_max: usize,
    pub crossing: Vec<i32>,
    pub phase: Option<f64>,
    layout: PackedLayout,
    transverse: TransverseGrid,
}

impl CylinderFamily {
    pub fn new(flux_set: Vec<FluxFamily>, design: CrossingDesign, grid: Grid1D, xi_max: usize, crossing: Vec<i32>) -> Result<Self> {
        let q = flux_set.len().saturating_sub(1);
        if crossing.len() != q {
            return Err(Error::Dimension(format!("crossing mode {crossing:?} does not have {q} entries")));
        }
        if crossing.iter().any(|k| k.unsigned_abs() as usize > xi_max) {
            return Err(Error::Argument(format!("crossing mode {crossing:?} outside the cutoff {xi_max}")));
        }
        let n = flux_set[0].dim();
        let transverse = TransverseGrid::new(q, xi_max)?;
        Ok(Self { layout: PackedLayout::new(n, q, xi_max), transverse, flux_set, design, grid, xi_max, crossing, phase: None })
    }

    /// The 2×2 exemplar with transverse fluxes `½F`, `¼F`.
    pub fn exemplar(grid: Grid1D, xi_max: usize, crossing: Vec<i32>) -> Result<Self> {
        let base = exemplar("exemplar2x2").expect("the 2×2 exemplar is registered");
        Self::new(transverse_flux_set(base, crossing.len()), CrossingDesign::default(), grid, xi_max, crossing)
    }

    pub fn transverse_dim(&self) -> usize {
        self.flux_set.len() - 1
    }

    pub fn components(&self) -> usize {
        self.layout.n
    }

    pub fn layout(&self) -> &PackedLayout {
        &self.layout
    }

    pub fn transverse_grid(&self) -> &TransverseGrid {
        &self.transverse
    }

    /// Packed state as a field.
    pub fn field(&self, packed: &GridFunction) -> Result<CylinderField> {
        CylinderField::from_packed(packed, self.layout.n, self.transverse_dim(), self.xi_max)
    }
}

impl ModelFamily for CylinderFamily {
    type Model = CylinderSystem;

    fn at(&self, eps: f64) -> Result<CylinderSystem> {
        CylinderSystem::planted(&self.flux_set, &self.design, eps, self.grid, self.xi_max, &self.crossing, self.phase)
    }

    fn zero(&self) -> GridFunction {
        GridFunction::zeros(self.grid, self.layout.block())
    }

    fn strong_norm(&self, b: &GridFunction) -> Result<f64> {
        if b.n_comp != self.layout.block() || b.grid != self.grid {
            return Err(Error::Dimension("state does not match the cylinder layout".into()));
        }
        Ok(physical_strong(&self.layout, &self.transverse, &self.grid, &b.values))
    }
}

/// A periodic orbit on the cylinder with its transverse diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderOrbit {
    pub orbit: PeriodicOrbit,
    pub crossing: Vec<i32>,
    pub xi_max: usize,
    pub n_comp: usize,
    /// Largest relative least-squares residual over the snapshots of fitting
    /// `u(x₁,·)` by `α(x₁)cos(ξ*·x̃) + β(x₁)sin(ξ*·x̃)` (by a constant at
    /// `ξ* = 0`).
    pub shape_residual: f64,
    /// Largest `sup(1+|x₁|)|c_ξ|` over `|ξ|_∞ > ξ_max/2` and the snapshots.
    pub spectral_tail: f64,
}

impl CylinderOrbit {
    /// Snapshots as fields.
    pub fn fields(&self) -> Result<Vec<CylinderField>> {
        let q = self.crossing.len();
        self.orbit.snapshots.iter().map(|s| CylinderField::from_packed(s, self.n_comp, q, self.xi_max)).collect()
    }
}

/// Relative residual of the per-node fit of `field` by the transverse shape
/// of mode `xi`.
pub fn shape_fit_residual(field: &CylinderField, tg: &TransverseGrid, xi: &[i32]) -> Result<f64> {
    let values = field.physical(tg)?;
    let (m, n, p) = (field.grid.len(), field.n_comp, tg.len());
    let planar = xi.iter().all(|k| *k == 0);
    let phase: Vec<f64> = (0..p).map(|pt| tg.coordinates(pt).iter().zip(xi).map(|(x, k)| x * *k as f64).sum()).collect();
    let (mut res, mut total) = (0.0, 0.0);
    for i in 0..m {
        for c in 0..n {
            let u: Vec<f64> = (0..p).map(|pt| values[(i * p + pt) * n + c]).collect();
            let energy: f64 = u.iter().map(|v| v * v).sum();
            total += energy;
            // the samples are uniform, so cos and sin are orthogonal with norm² p/2
            let fitted = if planar {
                let mean = u.iter().sum::<f64>() / p as f64;
                energy - p as f64 * mean * mean
            } else {
                let a: f64 = u.iter().zip(&phase).map(|(v, t)| v * t.cos()).sum::<f64>() * 2.0 / p as f64;
                let b: f64 = u.iter().zip(&phase).map(|(v, t)| v * t.sin()).sum::<f64>() * 2.0 / p as f64;
                energy - 0.5 * p as f64 * (a * a + b * b)
            };
            res += fitted.max(0.0);
        }
    }
    Ok(if total > 0.0 { (res / total).sqrt() } else { 0.0 })
}

/// Periodic orbit of amplitude `a` bifurcating from the pair planted at
/// `family.crossing`.
pub fn multid_orbit(family: CylinderFamily, a: f64, flow: FlowOptions, opts: &OrbitOptions) -> Result<CylinderOrbit> {
    let crossing = family.crossing.clone();
    let (xi_max, n) = (family.xi_max, family.components());
    let tg = family.transverse_grid().clone();
    let system = PoincareSystem::new(family, flow);
    let orbit = find_periodic_orbit(&system, a, opts)?;
    let mut shape_residual: f64 = 0.0;
    let mut spectral_tail: f64 = 0.0;
    for s in &orbit.snapshots {
        let field = CylinderField::from_packed(s, n, crossing.len(), xi_max)?;
        shape_residual = shape_residual.max(shape_fit_residual(&field, &tg, &crossing)?);
        spectral_tail = spectral_tail.max(field.tail(xi_max / 2));
    }
    Ok(CylinderOrbit { orbit, crossing, xi_max, n_comp: n, shape_residual, spectral_tail })
}
