//! Uniform grids, grid functions, the four working norms and composite
//! quadrature.
//!
//! The norms come in two flavors. `B1` is the plain L² norm and `X1` the
//! weighted sup norm `sup (1+|x|)|f|`. The pair kinds measure a derivative
//! `∂ₓf` through its antiderivative density `f`, passed as `aux`:
//! `B2(∂ₓf) = ‖f‖_{L¹} + ‖∂ₓf‖_{L²}` and
//! `X2(∂ₓf) = sup (1+|x|)²|f| + X1(∂ₓf)`.

use crate::error::{Error, Result};
use crate::numerics::Scalar;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    half_width: f64,
    point_count: usize,
}

impl Grid1D {
    pub fn new(half_width: f64, point_count: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Argument(format!("half width must be positive, got {half_width}")));
        }
        if point_count < 3 || point_count % 2 == 0 {
            return Err(Error::Argument(format!("point count must be odd and >= 3, got {point_count}")));
        }
        Ok(Self { half_width, point_count })
    }

    /// Grid with spacing as close to `h` as an odd node count allows.
    pub fn with_spacing(half_width: f64, h: f64) -> Result<Self> {
        let cells = (2.0 * half_width / h).round() as usize;
        let cells = cells + cells % 2;
        Self::new(half_width, cells.max(2) + 1)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.point_count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.point_count - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        // symmetric evaluation keeps x_{n-1-i} = -x_i exactly
        let c = (self.point_count - 1) / 2;
        (i as f64 - c as f64) * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.point_count).map(|i| self.x(i)).collect()
    }

    pub fn center(&self) -> usize {
        (self.point_count - 1) / 2
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.point_count];
        w[0] = 0.5 * h;
        w[self.point_count - 1] = 0.5 * h;
        w
    }

    pub fn sample<T: Scalar>(&self, f: impl Fn(f64) -> T) -> GridFunction<T> {
        GridFunction { grid: *self, n_comp: 1, values: self.nodes().into_iter().map(f).collect() }
    }

    /// Linear interpolation of nodal samples at `x`, clamped to the end values.
    pub fn interp(&self, values: &[f64], x: f64) -> f64 {
        let h = self.h();
        let s = (x + self.half_width) / h;
        if s <= 0.0 {
            return values[0];
        }
        let last = self.point_count - 1;
        if s >= last as f64 {
            return values[last];
        }
        let i = s.floor() as usize;
        let th = s - i as f64;
        values[i] * (1.0 - th) + values[i + 1] * th
    }

    /// Cubic Hermite interpolation from nodal values and derivatives, clamped
    /// to the end values outside the grid.
    pub fn interp_hermite(&self, values: &[f64], derivs: &[f64], x: f64) -> f64 {
        let h = self.h();
        let s = (x + self.half_width) / h;
        if s <= 0.0 {
            return values[0];
        }
        let last = self.point_count - 1;
        if s >= last as f64 {
            return values[last];
        }
        let i = (s.floor() as usize).min(last - 1);
        let x0 = self.x(i);
        crate::numerics::ode::hermite(x0, values[i], derivs[i], x0 + h, values[i + 1], derivs[i + 1], x)
    }
}

/// Samples on a grid, node-major with `n_comp` components per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction<T = f64> {
    pub grid: Grid1D,
    pub n_comp: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(grid: Grid1D, n_comp: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() * n_comp {
            return Err(Error::Dimension(format!(
                "expected {} values, got {}",
                grid.len() * n_comp,
                values.len()
            )));
        }
        Ok(Self { grid, n_comp, values })
    }

    pub fn zeros(grid: Grid1D, n_comp: usize) -> Self {
        Self { grid, n_comp, values: vec![T::zero(); grid.len() * n_comp] }
    }

    pub fn at(&self, i: usize, c: usize) -> T {
        self.values[i * self.n_comp + c]
    }

    pub fn component(&self, c: usize) -> Vec<T> {
        (0..self.grid.len()).map(|i| self.at(i, c)).collect()
    }

    /// Euclidean length of the node vector at each node.
    pub fn pointwise_modulus(&self) -> Vec<f64> {
        self.values
            .chunks(self.n_comp)
            .map(|c| c.iter().map(|v| v.modulus().powi(2)).sum::<f64>().sqrt())
            .collect()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { grid: self.grid, n_comp: self.n_comp, values: self.values.iter().map(|v| *v * s).collect() }
    }

    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * *b;
        }
        Ok(())
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.n_comp != other.n_comp {
            return Err(Error::Dimension("grid functions live on different grids".into()));
        }
        Ok(())
    }

    /// Trapezoid integral of each component.
    pub fn integral(&self) -> Vec<T> {
        let w = self.grid.weights();
        let mut out = vec![T::zero(); self.n_comp];
        for (i, wi) in w.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += self.at(i, c) * *wi;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    B1,
    B2Pair,
    X1,
    X2Pair,
}

pub fn l1(f: &[f64], grid: &Grid1D) -> f64 {
    f.iter().zip(grid.weights()).map(|(v, w)| v.abs() * w).sum()
}

pub fn l2(f: &[f64], grid: &Grid1D) -> f64 {
    f.iter().zip(grid.weights()).map(|(v, w)| v * v * w).sum::<f64>().sqrt()
}

pub fn weighted_sup(f: &[f64], grid: &Grid1D, power: i32) -> f64 {
    f.iter()
        .enumerate()
        .map(|(i, v)| (1.0 + grid.x(i).abs()).powi(power) * v.abs())
        .fold(0.0, f64::max)
}

/// Norm of a grid function; `aux` carries the antiderivative density for the
/// pair kinds.
pub fn norm<T: Scalar>(f: &GridFunction<T>, kind: NormKind, aux: Option<&GridFunction<T>>) -> Result<f64> {
    let m = f.pointwise_modulus();
    let g = &f.grid;
    let aux_mod = |kind: &str| -> Result<Vec<f64>> {
        let a = aux.ok_or_else(|| Error::Argument(format!("{kind} norm needs an antiderivative density")))?;
        f.check_same(a)?;
        Ok(a.pointwise_modulus())
    };
    Ok(match kind {
        NormKind::B1 => l2(&m, g),
        NormKind::X1 => weighted_sup(&m, g, 1),
        NormKind::B2Pair => l1(&aux_mod("B2")?, g) + l2(&m, g),
        NormKind::X2Pair => weighted_sup(&aux_mod("X2")?, g, 2) + weighted_sup(&m, g, 1),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureRule {
    Trapezoid,
    Simpson,
}

/// Composite trapezoid or Simpson rule over equally spaced samples.
pub fn quadrature(samples: &[f64], h: f64, rule: QuadratureRule) -> Result<f64> {
    let n = samples.len();
    match rule {
        QuadratureRule::Trapezoid => {
            if n < 2 {
                return Err(Error::Argument("trapezoid needs at least two samples".into()));
            }
            let inner: f64 = samples[1..n - 1].iter().sum();
            Ok(h * (0.5 * (samples[0] + samples[n - 1]) + inner))
        }
        QuadratureRule::Simpson => {
            if n < 3 || n % 2 == 0 {
                return Err(Error::Argument(format!("simpson needs an odd count >= 3, got {n}")));
            }
            let mut s = samples[0] + samples[n - 1];
            for (i, v) in samples.iter().enumerate().take(n - 1).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            Ok(h * s / 3.0)
        }
    }
}

/// Running trapezoid integral from the left end, starting at zero.
pub fn cumulative_trapezoid<T: Scalar>(samples: &[T], h: f64) -> Vec<T> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = T::zero();
    out.push(acc);
    for w in samples.windows(2) {
        acc += (w[0] + w[1]) * (0.5 * h);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_symmetric_with_center_node() {
        let g = Grid1D::new(3.0, 7).unwrap();
        assert_eq!(g.h(), 1.0);
        assert_eq!(g.x(g.center()), 0.0);
        for i in 0..7 {
            assert_eq!(g.x(i), -g.x(6 - i));
        }
        assert!(Grid1D::new(1.0, 6).is_err());
        assert!(Grid1D::new(1.0, 1).is_err());
    }

    #[test]
    fn constant_function_b1() {
        let g = Grid1D::new(5.0, 101).unwrap();
        let f = g.sample(|_| 1.0);
        assert!((norm(&f, NormKind::B1, None).unwrap() - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn x1_of_weight_inverse_is_one() {
        let g = Grid1D::new(10.0, 201).unwrap();
        let f = g.sample(|x| 1.0 / (1.0 + x.abs()));
        assert!((norm(&f, NormKind::X1, None).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_b1() {
        let g = Grid1D::new(20.0, 4001).unwrap();
        let f = g.sample(|x| (-x * x).exp());
        let v = norm(&f, NormKind::B1, None).unwrap();
        assert!((v - (std::f64::consts::PI / 2.0).powf(0.25)).abs() < 1e-10);
        assert!((v - 1.11951).abs() < 1e-5);
    }

    #[test]
    fn pair_kinds_need_aux() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let f = g.sample(|x| x);
        assert!(matches!(norm(&f, NormKind::B2Pair, None), Err(Error::Argument(_))));
        let other = Grid1D::new(2.0, 5).unwrap().sample(|x| x);
        assert!(matches!(norm(&f, NormKind::X2Pair, Some(&other)), Err(Error::Dimension(_))));
    }

    #[test]
    fn pair_norm_values() {
        let g = Grid1D::new(30.0, 6001).unwrap();
        let dens = g.sample(|x| (-x * x).exp());
        let deriv = g.sample(|x| -2.0 * x * (-x * x).exp());
        let b2 = norm(&deriv, NormKind::B2Pair, Some(&dens)).unwrap();
        // ‖2x e^{-x²}‖₂² = √(π/2)
        let l2d = (std::f64::consts::PI / 2.0).sqrt().sqrt();
        assert!((b2 - (std::f64::consts::PI.sqrt() + l2d)).abs() < 1e-8, "{b2}");
        let x2 = norm(&deriv, NormKind::X2Pair, Some(&dens)).unwrap();
        assert!(x2 > 1.0);
    }

    #[test]
    fn quadrature_examples() {
        let s = [0.0, 0.25, 1.0];
        assert!((quadrature(&s, 0.5, QuadratureRule::Simpson).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((quadrature(&s, 0.5, QuadratureRule::Trapezoid).unwrap() - 0.375).abs() < 1e-15);
        assert!(quadrature(&[1.0, 2.0], 1.0, QuadratureRule::Simpson).is_err());
        assert!(quadrature(&[1.0], 1.0, QuadratureRule::Trapezoid).is_err());
    }

    fn rule_error(n: usize, rule: QuadratureRule, f: impl Fn(f64) -> f64, exact: f64) -> f64 {
        let h = 1.0 / (n - 1) as f64;
        let s: Vec<f64> = (0..n).map(|i| f(i as f64 * h)).collect();
        (quadrature(&s, h, rule).unwrap() - exact).abs()
    }

    #[test]
    fn convergence_orders() {
        let f = |x: f64| (2.0 * x).sin() + x.exp();
        let exact = (1.0 - 2f64.cos()) / 2.0 + 1f64.exp() - 1.0;
        let e1 = rule_error(17, QuadratureRule::Trapezoid, f, exact);
        let e2 = rule_error(33, QuadratureRule::Trapezoid, f, exact);
        assert!(e1 / e2 >= 3.9, "trapezoid ratio {}", e1 / e2);
        let s1 = rule_error(17, QuadratureRule::Simpson, f, exact);
        let s2 = rule_error(33, QuadratureRule::Simpson, f, exact);
        assert!((s1 / s2).log2() >= 3.9, "simpson order {}", (s1 / s2).log2());
    }

    #[test]
    fn gaussian_trapezoid_refinement_towards_sqrt_pi() {
        // On [-10, 10] the trapezoid rule is spectrally accurate for e^{-x²};
        // refinement must move monotonically onto √π.
        let pi_sqrt = std::f64::consts::PI.sqrt();
        let t = |n: usize| {
            let g = Grid1D::new(10.0, n).unwrap();
            let s: Vec<f64> = g.nodes().iter().map(|x| (-x * x).exp()).collect();
            quadrature(&s, g.h(), QuadratureRule::Trapezoid).unwrap()
        };
        let (coarse, fine) = (t(11), t(21));
        let richardson = (4.0 * fine - coarse) / 3.0;
        assert!((fine - pi_sqrt).abs() < (coarse - pi_sqrt).abs());
        assert!((richardson - pi_sqrt).abs() < (coarse - pi_sqrt).abs());
        assert!((t(81) - pi_sqrt).abs() < 1e-12);
    }

    #[test]
    fn b1_bounded_by_x1_times_weight_norm() {
        let g = Grid1D::new(40.0, 801).unwrap();
        let c = l2(&g.nodes().iter().map(|x| 1.0 / (1.0 + x.abs())).collect::<Vec<_>>(), &g);
        for k in 1..6 {
            let f = g.sample(|x| (k as f64 * x).cos() / (1.0 + x * x).sqrt());
            let b1 = norm(&f, NormKind::B1, None).unwrap();
            let x1 = norm(&f, NormKind::X1, None).unwrap();
            assert!(b1 <= c * x1 * (1.0 + 1e-12));
        }
    }
}
