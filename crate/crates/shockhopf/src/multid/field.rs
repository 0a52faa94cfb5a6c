use crate::error::{Error, Result};
use crate::spaces::{weighted_sup, Grid1D, GridFunction};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Wave numbers `ξ ∈ ℤ^q` with `max_j |ξ_j| ≤ xi_max`, lexicographic.
pub fn full_modes(q: usize, xi_max: usize) -> Vec<Vec<i32>> {
    let m = xi_max as i32;
    let mut out: Vec<Vec<i32>> = vec![vec![]];
    for _ in 0..q {
        out = out.into_iter().flat_map(|p| (-m..=m).map(move |k| [p.clone(), vec![k]].concat())).collect();
    }
    out
}

/// `0` followed by the modes whose first nonzero entry is positive; a real
/// field is fixed by its coefficients on this set.
pub fn half_modes(q: usize, xi_max: usize) -> Vec<Vec<i32>> {
    let mut out = vec![vec![0; q]];
    out.extend(full_modes(q, xi_max).into_iter().filter(|x| x.iter().find(|k| **k != 0).is_some_and(|k| *k > 0)));
    out
}

pub fn xi_norm_sq(xi: &[i32]) -> f64 {
    xi.iter().map(|k| (*k as f64).powi(2)).sum()
}

/// Uniform samples of the `2π`-torus in `q ∈ {1, 2}` directions, with
/// `N ≥ 3ξ_max + 1` points per axis so that quadratic products of modes up to
/// `ξ_max` are alias-free after truncation back to `ξ_max`.
#[derive(Clone)]
pub struct TransverseGrid {
    q: usize,
    xi_max: usize,
    points: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TransverseGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransverseGrid").field("q", &self.q).field("xi_max", &self.xi_max).field("points", &self.points).finish()
    }
}

impl TransverseGrid {
    pub fn new(q: usize, xi_max: usize) -> Result<Self> {
        if !(1..=2).contains(&q) {
            return Err(Error::Configuration(format!("only torus cross-sections of dimension 1 or 2 are supported, got {q}")));
        }
        let points = (3 * xi_max + 1).next_power_of_two().max(4);
        let mut planner = FftPlanner::new();
        Ok(Self { q, xi_max, points, forward: planner.plan_fft_forward(points), inverse: planner.plan_fft_inverse(points) })
    }

    pub fn transverse_dim(&self) -> usize {
        self.q
    }

    pub fn xi_max(&self) -> usize {
        self.xi_max
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    /// Number of sample points.
    pub fn len(&self) -> usize {
        self.points.pow(self.q as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `x̃` at flat sample index `p`.
    pub fn coordinates(&self, p: usize) -> Vec<f64> {
        let n = self.points;
        let h = 2.0 * PI / n as f64;
        match self.q {
            1 => vec![p as f64 * h],
            _ => vec![(p / n) as f64 * h, (p % n) as f64 * h],
        }
    }

    /// Flat index of `ξ mod N`.
    pub fn slot(&self, xi: &[i32]) -> usize {
        let n = self.points as i32;
        xi.iter().fold(0, |acc, k| acc * self.points + k.rem_euclid(n) as usize)
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.points;
        plan.process(buf);
        if self.q == 2 {
            transpose(buf, n);
            plan.process(buf);
            transpose(buf, n);
        }
    }

    /// `u(x̃_p) = Σ_ξ c_ξ e^{iξ·x̃_p}` from coefficients placed by `slot`.
    pub fn synthesize(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.inverse);
    }

    /// `c_ξ = N^{−q}Σ_p u(x̃_p)e^{−iξ·x̃_p}`, left at `slot(ξ)`.
    pub fn analyze(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.forward);
        let s = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Layout of a real cylinder field as a real vector on the `x₁` grid: per
/// node the `n` values of mode `0`, then for each further mode of the half
/// set its `n` real parts and `n` imaginary parts. The field is
/// `u = c₀ + 2ℜΣ_{ξ≠0} c_ξe^{iξ·x̃}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedLayout {
    pub n: usize,
    pub half: Vec<Vec<i32>>,
}

impl PackedLayout {
    pub fn new(n: usize, q: usize, xi_max: usize) -> Self {
        Self { n, half: half_modes(q, xi_max) }
    }

    /// Reals per node.
    pub fn block(&self) -> usize {
        self.n * (2 * self.half.len() - 1)
    }

    /// Coefficients of half-set mode `k`, node-major.
    pub fn mode(&self, packed: &[f64], k: usize) -> Vec<Complex64> {
        let (n, b) = (self.n, self.block());
        let nodes = packed.len() / b;
        let mut out = Vec::with_capacity(nodes * n);
        for i in 0..nodes {
            let base = i * b;
            for c in 0..n {
                out.push(if k == 0 {
                    Complex64::new(packed[base + c], 0.0)
                } else {
                    let o = base + n + 2 * n * (k - 1);
                    Complex64::new(packed[o + c], packed[o + n + c])
                });
            }
        }
        out
    }

    /// Writes mode `k`; mode `0` keeps only real parts.
    pub fn set_mode(&self, packed: &mut [f64], k: usize, values: &[Complex64]) {
        let (n, b) = (self.n, self.block());
        for (i, node) in values.chunks(n).enumerate() {
            let base = i * b;
            for (c, z) in node.iter().enumerate() {
                if k == 0 {
                    packed[base + c] = z.re;
                } else {
                    let o = base + n + 2 * n * (k - 1);
                    packed[o + c] = z.re;
                    packed[o + n + c] = z.im;
                }
            }
        }
    }
}

/// A field on `x₁ ×` torus stored by transverse Fourier coefficients over
/// the full mode box, node-major per mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderField {
    pub grid: Grid1D,
    pub n_comp: usize,
    pub transverse_dim: usize,
    pub xi_max: usize,
    pub modes: Vec<Vec<i32>>,
    pub coefficients: Vec<Vec<Complex64>>,
    /// Set for real fields, whose coefficients satisfy `c(−ξ) = conj c(ξ)`.
    pub hermitian: bool,
}

impl CylinderField {
    pub fn zeros(grid: Grid1D, n_comp: usize, transverse_dim: usize, xi_max: usize, hermitian: bool) -> Self {
        let modes = full_modes(transverse_dim, xi_max);
        let coefficients = vec![vec![Complex64::new(0.0, 0.0); grid.len() * n_comp]; modes.len()];
        Self { grid, n_comp, transverse_dim, xi_max, modes, coefficients, hermitian }
    }

    pub fn mode_index(&self, xi: &[i32]) -> Option<usize> {
        if xi.len() != self.transverse_dim || xi.iter().any(|k| k.unsigned_abs() as usize > self.xi_max) {
            return None;
        }
        let side = 2 * self.xi_max + 1;
        Some(xi.iter().fold(0, |acc, k| acc * side + (k + self.xi_max as i32) as usize))
    }

    pub fn mode(&self, xi: &[i32]) -> Option<&[Complex64]> {
        self.mode_index(xi).map(|k| self.coefficients[k].as_slice())
    }

    /// Sets mode `ξ`, and `−ξ` to the conjugate for Hermitian fields.
    pub fn set_mode(&mut self, xi: &[i32], values: Vec<Complex64>) -> Result<()> {
        let k = self.mode_index(xi).ok_or_else(|| Error::Argument(format!("mode {xi:?} outside the cutoff {}", self.xi_max)))?;
        if values.len() != self.grid.len() * self.n_comp {
            return Err(Error::Dimension("mode coefficients do not match the grid".into()));
        }
        if self.hermitian {
            let minus: Vec<i32> = xi.iter().map(|v| -v).collect();
            let j = self.mode_index(&minus).expect("the cutoff box is symmetric");
            if j == k {
                self.coefficients[k] = values.iter().map(|z| Complex64::new(z.re, 0.0)).collect();
                return Ok(());
            }
            self.coefficients[j] = values.iter().map(|z| z.conj()).collect();
        }
        self.coefficients[k] = values;
        Ok(())
    }

    /// `max |c(−ξ) − conj c(ξ)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, xi) in self.modes.iter().enumerate() {
            let minus: Vec<i32> = xi.iter().map(|v| -v).collect();
            let j = self.mode_index(&minus).expect("the cutoff box is symmetric");
            for (a, b) in self.coefficients[k].iter().zip(&self.coefficients[j]) {
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst
    }

    /// Samples `f(x₁, x̃)` and keeps the coefficients up to the cutoff.
    pub fn sample(
        grid: Grid1D,
        n_comp: usize,
        transverse_dim: usize,
        xi_max: usize,
        f: impl Fn(f64, &[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let tg = TransverseGrid::new(transverse_dim, xi_max)?;
        let mut out = Self::zeros(grid, n_comp, transverse_dim, xi_max, true);
        let p = tg.len();
        let mut bufs = vec![vec![Complex64::new(0.0, 0.0); p]; n_comp];
        for i in 0..grid.len() {
            for q in 0..p {
                let v = f(grid.x(i), &tg.coordinates(q));
                if v.len() != n_comp {
                    return Err(Error::Dimension("sampled field has the wrong component count".into()));
                }
                for c in 0..n_comp {
                    bufs[c][q] = Complex64::new(v[c], 0.0);
                }
            }
            for (c, b) in bufs.iter_mut().enumerate() {
                tg.analyze(b);
                for (k, xi) in out.modes.iter().enumerate() {
                    out.coefficients[k][i * n_comp + c] = b[tg.slot(xi)];
                }
            }
        }
        Ok(out)
    }

    /// Values at the transverse samples, laid out `[(i·P + p)·n + c]`.
    pub fn physical_complex(&self, tg: &TransverseGrid) -> Result<Vec<Complex64>> {
        if tg.transverse_dim() != self.transverse_dim || tg.xi_max() < self.xi_max {
            return Err(Error::Dimension("transverse grid does not resolve the field's modes".into()));
        }
        let (m, n, p) = (self.grid.len(), self.n_comp, tg.len());
        let mut out = vec![Complex64::new(0.0, 0.0); m * p * n];
        let mut buf = vec![Complex64::new(0.0, 0.0); p];
        for i in 0..m {
            for c in 0..n {
                buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                for (k, xi) in self.modes.iter().enumerate() {
                    buf[tg.slot(xi)] = self.coefficients[k][i * n + c];
                }
                tg.synthesize(&mut buf);
                for (q, z) in buf.iter().enumerate() {
                    out[(i * p + q) * n + c] = *z;
                }
            }
        }
        Ok(out)
    }

    /// Real parts of [`physical_complex`](Self::physical_complex).
    pub fn physical(&self, tg: &TransverseGrid) -> Result<Vec<f64>> {
        Ok(self.physical_complex(tg)?.into_iter().map(|z| z.re).collect())
    }

    /// `sup_{x₁}(1+|x₁|)|c_ξ(x₁)|` for the mode at index `k`.
    pub fn mode_strong(&self, k: usize) -> f64 {
        let modulus: Vec<f64> =
            self.coefficients[k].chunks(self.n_comp).map(|z| z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).collect();
        weighted_sup(&modulus, &self.grid, 1)
    }

    /// Largest [`mode_strong`](Self::mode_strong) over modes with
    /// `max_j |ξ_j| > beyond`.
    pub fn tail(&self, beyond: usize) -> f64 {
        (0..self.modes.len())
            .filter(|k| self.modes[*k].iter().any(|v| v.unsigned_abs() as usize > beyond))
            .map(|k| self.mode_strong(k))
            .fold(0.0, f64::max)
    }

    /// The packed real form of a Hermitian field.
    pub fn to_packed(&self) -> Result<GridFunction> {
        if !self.hermitian {
            return Err(Error::Argument("only real fields have a packed form".into()));
        }
        let layout = PackedLayout::new(self.n_comp, self.transverse_dim, self.xi_max);
        let mut values = vec![0.0; self.grid.len() * layout.block()];
        for (k, xi) in layout.half.iter().enumerate() {
            layout.set_mode(&mut values, k, self.mode(xi).expect("half modes lie in the box"));
        }
        GridFunction::new(self.grid, layout.block(), values)
    }

    pub fn from_packed(packed: &GridFunction, n_comp: usize, transverse_dim: usize, xi_max: usize) -> Result<Self> {
        let layout = PackedLayout::new(n_comp, transverse_dim, xi_max);
        if packed.n_comp != layout.block() {
            return Err(Error::Dimension("packed field does not match the mode layout".into()));
        }
        let mut out = Self::zeros(packed.grid, n_comp, transverse_dim, xi_max, true);
        for (k, xi) in layout.half.iter().enumerate() {
            out.set_mode(xi, layout.mode(&packed.values, k))?;
        }
        Ok(out)
    }
}
