//! Moving heat kernels `K`, the excited kernel `J`, their exact derivatives,
//! the model Green function and transverse convolution.

mod greens;
mod poly;

pub use greens::{time_cutoff, GreensModel, SideData};
pub use poly::GaussPoly;

use crate::error::{Error, Result};
use crate::numerics::fit::fit_power_law;
use crate::profiles::ShockProfile;
use crate::spaces::{l2, weighted_sup, Grid1D, GridFunction, NormKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// `(1/2π)∫_{−∞}^z e^{−ξ²} dξ`; note the `1/2π` normalization, so the upper
/// limit is `√π/2π`.
pub fn errfn(z: f64) -> f64 {
    PI.sqrt() / (4.0 * PI) * statrs::function::erf::erfc(-z)
}

pub const MAX_Y_ORDER: usize = 4;
pub const MAX_T_ORDER: usize = 4;

pub type ProfileShape = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelKind {
    /// `K(x,t;y) = t^{−1/2} e^{−(x−y−at)²/4t}`.
    Scattering,
    /// `J(x,t;y) = ū′(x)·errfn((−y−at)/2t^{1/2})` with the given `ū′`.
    Excited(ProfileShape),
}

impl std::fmt::Debug for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelKind::Scattering => write!(f, "Scattering"),
            KernelKind::Excited(_) => write!(f, "Excited"),
        }
    }
}

/// A model kernel with transport speed `a` and its derivative table.
#[derive(Clone, Debug)]
pub struct ModelKernel {
    a: f64,
    kind: KernelKind,
    /// `∂_y^α ∂_t^β K` for `α ≤ 4`, `β ≤ 4`.
    table: Vec<Vec<GaussPoly>>,
    /// `∂_t^β J / ū′` for `β = 1..=4`, as polynomials in `z = −y − at`.
    excited_t: Vec<GaussPoly>,
}

impl ModelKernel {
    fn build(a: f64, kind: KernelKind) -> Result<Self> {
        if a == 0.0 || !a.is_finite() {
            return Err(Error::Argument(format!("kernel speed must be finite and nonzero, got {a}")));
        }
        let mut table = Vec::with_capacity(MAX_Y_ORDER + 1);
        let mut row = GaussPoly::heat();
        for _ in 0..=MAX_Y_ORDER {
            let mut col = Vec::with_capacity(MAX_T_ORDER + 1);
            let mut p = row.clone();
            for _ in 0..=MAX_T_ORDER {
                let next = p.dt(a);
                col.push(p);
                p = next;
            }
            table.push(col);
            row = row.dy();
        }
        // ∂_t errfn(z/2√t) = (1/8π)(−z/t − 2a)K(0,t;y)
        let mut p = GaussPoly::monomial(-1.0 / (8.0 * PI), 1, -3).add(&GaussPoly::monomial(-2.0 * a / (8.0 * PI), 0, -1));
        let mut excited_t = Vec::with_capacity(MAX_T_ORDER);
        for _ in 0..MAX_T_ORDER {
            let next = p.dt(a);
            excited_t.push(p);
            p = next;
        }
        Ok(Self { a, kind, table, excited_t })
    }

    pub fn scattering(a: f64) -> Result<Self> {
        Self::build(a, KernelKind::Scattering)
    }

    pub fn excited(a: f64, profile_derivative: ProfileShape) -> Result<Self> {
        Self::build(a, KernelKind::Excited(profile_derivative))
    }

    /// `J` with `ū′` taken from one component of a computed profile,
    /// interpolated linearly and zero off the grid.
    pub fn excited_from_profile(a: f64, profile: &ShockProfile, component: usize) -> Result<Self> {
        if component >= profile.dim() {
            return Err(Error::Dimension(format!("profile has no component {component}")));
        }
        let g = profile.grid();
        let du = profile.derivative.component(component);
        let shape: ProfileShape =
            Arc::new(move |x: f64| if x.abs() > g.half_width() { 0.0 } else { g.interp(&du, x) });
        Self::excited(a, shape)
    }

    pub fn speed(&self) -> f64 {
        self.a
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn is_excited(&self) -> bool {
        matches!(self.kind, KernelKind::Excited(_))
    }

    pub fn eval(&self, x: f64, t: f64, y: f64) -> Result<f64> {
        kernel_derivative(self, 0, 0, x, t, y)
    }

    /// Polynomial for `∂_y^α ∂_t^β K`.
    pub fn derivative_poly(&self, alpha: usize, beta: usize) -> Result<&GaussPoly> {
        check_orders(alpha, beta)?;
        Ok(&self.table[alpha][beta])
    }
}

fn check_orders(alpha: usize, beta: usize) -> Result<()> {
    if alpha > MAX_Y_ORDER || beta > MAX_T_ORDER {
        return Err(Error::Argument(format!(
            "derivative orders (α,β) = ({alpha},{beta}) exceed ({MAX_Y_ORDER},{MAX_T_ORDER})"
        )));
    }
    Ok(())
}

/// `∂_y^α ∂_t^β` of the kernel at `(x, t; y)`.
pub fn kernel_derivative(k: &ModelKernel, alpha: usize, beta: usize, x: f64, t: f64, y: f64) -> Result<f64> {
    check_orders(alpha, beta)?;
    if t <= 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!("kernel needs t > 0, got {t}")));
    }
    let a = k.a;
    match &k.kind {
        KernelKind::Scattering => Ok(k.table[alpha][beta].eval(x - y - a * t, t)),
        KernelKind::Excited(du) => {
            let z = -y - a * t;
            let v = match (alpha, beta) {
                (0, 0) => errfn(z / (2.0 * t.sqrt())),
                (0, b) => k.excited_t[b - 1].eval(z, t),
                // J_y = −(1/4π) ū′(x) K(0,t;y)
                (al, b) => -k.table[al - 1][b].eval(z, t) / (4.0 * PI),
            };
            Ok(du(x) * v)
        }
    }
}

/// `|K_y − a⁻¹(K_t − K_yy)|`.
pub fn cancellation_residual(k: &ModelKernel, x: f64, t: f64, y: f64) -> Result<f64> {
    let ky = kernel_derivative(k, 1, 0, x, t, y)?;
    let kt = kernel_derivative(k, 0, 1, x, t, y)?;
    let kyy = kernel_derivative(k, 2, 0, x, t, y)?;
    Ok((ky - (kt - kyy) / k.a).abs())
}

/// A kernel `G̃(x,t;y)` with `n×n` matrix values, row-major.
pub trait TransverseKernel: Sync {
    fn components(&self) -> usize;
    fn kernel_value(&self, x: f64, t: f64, y: f64, out: &mut [f64]) -> Result<()>;
}

impl TransverseKernel for ModelKernel {
    fn components(&self) -> usize {
        1
    }

    fn kernel_value(&self, x: f64, t: f64, y: f64, out: &mut [f64]) -> Result<()> {
        out[0] = self.eval(x, t, y)?;
        Ok(())
    }
}

/// `(Sf)(x) = ∫ G̃(x,T;y) f(y) dy` by the trapezoid rule on `f`'s grid.
///
/// Rows are independent and each is summed in node order, so the result does
/// not depend on the thread count.
pub fn apply_transverse<G: TransverseKernel + ?Sized>(g: &G, f: &GridFunction, t: f64) -> Result<GridFunction> {
    let n = g.components();
    if f.n_comp != n {
        return Err(Error::Dimension(format!("kernel has {n} components, input has {}", f.n_comp)));
    }
    if t <= 0.0 {
        return Err(Error::Domain(format!("transverse step needs T > 0, got {t}")));
    }
    let grid = f.grid;
    let w = grid.weights();
    let rows: Result<Vec<Vec<f64>>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.x(i);
            let mut acc = vec![0.0; n];
            let mut m = vec![0.0; n * n];
            for (j, wj) in w.iter().enumerate() {
                let fj = &f.values[j * n..(j + 1) * n];
                if fj.iter().all(|v| *v == 0.0) {
                    continue;
                }
                g.kernel_value(x, t, grid.x(j), &mut m)?;
                for r in 0..n {
                    let s: f64 = (0..n).map(|c| m[r * n + c] * fj[c]).sum();
                    acc[r] += wj * s;
                }
            }
            Ok(acc)
        })
        .collect();
    GridFunction::new(grid, n, rows?.concat())
}

/// Fitted `‖∂_y^α ∂_t^β G(·,T;y)‖ ≈ C T^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormLaw {
    pub exponent: f64,
    pub constant: f64,
    pub residual: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Tail mass fraction of a unit Gaussian of variance `2T` outside `[−L, L]`.
fn gaussian_escape(half_width: f64, t: f64) -> f64 {
    statrs::function::erf::erfc(half_width / (2.0 * t.sqrt()))
}

/// Grid used by [`kernel_norm`] when none is supplied: for `K` it scales with
/// the diffusive width; for `J` it resolves a unit-width profile.
pub fn default_norm_grid(k: &ModelKernel, t: f64) -> Grid1D {
    if k.is_excited() {
        Grid1D::new(40.0, 1601).expect("static grid")
    } else {
        Grid1D::new(12.0 * t.sqrt().max(1.0), 241).expect("static grid")
    }
}

/// `sup_y ‖∂_y^α ∂_t^β G(·,T;y)‖` in the `B1` (L²) or `X1` (weighted sup)
/// norm. The supremum is attained at `y = −aT`, which also centers `K` at
/// `x = 0`.
pub fn kernel_norm(k: &ModelKernel, alpha: usize, beta: usize, kind: NormKind, t: f64, grid: Option<&Grid1D>) -> Result<f64> {
    let g = match grid {
        Some(g) => *g,
        None => default_norm_grid(k, t),
    };
    if !k.is_excited() && gaussian_escape(g.half_width(), t) > 1e-6 {
        return Err(Error::DomainTooSmall(format!(
            "half-width {} too small for T = {t}: Gaussian mass leaves the domain",
            g.half_width()
        )));
    }
    let y = -k.a * t;
    let vals: Result<Vec<f64>> = g.nodes().iter().map(|&x| kernel_derivative(k, alpha, beta, x, t, y)).collect();
    let vals = vals?;
    match kind {
        NormKind::B1 => Ok(l2(&vals, &g)),
        NormKind::X1 => Ok(weighted_sup(&vals, &g, 1)),
        _ => Err(Error::Argument(format!("{kind:?} is a pair norm; kernel columns use B1 or X1"))),
    }
}

/// Log-log least squares of [`kernel_norm`] over `times`.
pub fn fit_norm_law(
    k: &ModelKernel,
    alpha: usize,
    beta: usize,
    kind: NormKind,
    times: &[f64],
    grid: Option<&Grid1D>,
) -> Result<NormLaw> {
    let (lo, hi) = times.iter().fold((f64::INFINITY, 0.0f64), |(l, h), t| (l.min(*t), h.max(*t)));
    if times.len() < 3 || hi / lo < 100.0 {
        return Err(Error::Argument("norm-law fit needs at least 3 times spanning 2 decades".into()));
    }
    let norms: Result<Vec<f64>> = times.par_iter().map(|&t| kernel_norm(k, alpha, beta, kind, t, grid)).collect();
    let norms = norms?;
    let fit = fit_power_law(times, &norms)?;
    Ok(NormLaw { exponent: fit.slope, constant: fit.intercept.exp(), residual: fit.residual, times: times.to_vec(), norms })
}

/// `max_x (1 + |x − y|)·K(x,T;y)` over the grid.
pub fn weighted_peak(k: &ModelKernel, t: f64, y: f64, grid: &Grid1D) -> Result<f64> {
    let mut m: f64 = 0.0;
    for x in grid.nodes() {
        m = m.max((1.0 + (x - y).abs()) * k.eval(x, t, y)?.abs());
    }
    Ok(m)
}

/// Smallest `C` with `h·Σ_y (1+|x−y|)⁻¹(1+|y|)⁻² ≤ C(1+|x|)⁻¹` at every node,
/// together with the per-node ratios.
pub fn convolution_weight_constant(grid: &Grid1D) -> (f64, Vec<f64>) {
    let nodes = grid.nodes();
    let w = grid.weights();
    let ratios: Vec<f64> = nodes
        .par_iter()
        .map(|&x| {
            let s: f64 = nodes.iter().zip(&w).map(|(y, wy)| wy / ((1.0 + (x - y).abs()) * (1.0 + y.abs()).powi(2))).sum();
            s * (1.0 + x.abs())
        })
        .collect();
    (ratios.iter().copied().fold(0.0, f64::max), ratios)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errfn_values() {
        assert!(errfn(-10.0) <= 1e-12);
        assert!((errfn(0.0) - PI.sqrt() / (4.0 * PI)).abs() < 1e-15);
        assert!((errfn(0.0) - 0.1410473959).abs() < 1e-10);
        assert!((errfn(10.0) - 0.2820947918).abs() < 1e-10);
    }

    #[test]
    fn order_and_domain_errors() {
        let k = ModelKernel::scattering(-1.0).unwrap();
        assert!(matches!(kernel_derivative(&k, 5, 0, 0.0, 1.0, 0.0), Err(Error::Argument(_))));
        assert!(matches!(kernel_derivative(&k, 0, 0, 0.0, 0.0, 0.0), Err(Error::Domain(_))));
        assert!(ModelKernel::scattering(0.0).is_err());
    }

    #[test]
    fn peak_values() {
        let k = ModelKernel::scattering(-1.0).unwrap();
        for t in [0.3, 1.0, 7.5, 200.0] {
            let y = 0.4;
            let x = y - t;
            assert!((k.eval(x, t, y).unwrap() - t.powf(-0.5)).abs() < 1e-15);
            assert_eq!(kernel_derivative(&k, 1, 0, x, t, y).unwrap(), 0.0);
        }
    }
}
