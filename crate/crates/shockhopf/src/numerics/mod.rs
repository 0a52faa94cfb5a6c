//! Small numerical kernels shared by the analysis modules: banded LU with a
//! low-rank correction, an adaptive Dormand-Prince integrator, scalar root
//! finders, least-squares fits and a shift-invert Arnoldi driver.

pub mod arnoldi;
pub mod band;
pub mod fit;
pub mod ode;
pub mod roots;

use num_complex::Complex64;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Field scalar used by the linear solvers: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Mul<f64, Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn conj(self) -> Self;
    fn re(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
}

/// Euclidean norm of a scalar slice.
pub fn norm2<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.modulus().powi(2)).sum::<f64>().sqrt()
}

/// Unconjugated dot product `Σ a_i b_i`.
pub fn dotu<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

/// Conjugated dot product `Σ conj(a_i) b_i`.
pub fn dotc<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += x.conj() * *y;
    }
    s
}

/// Solves a small dense system in place by Gaussian elimination with partial
/// pivoting. `a` is row-major `k×k`; `b` is `k×m` row-major.
pub fn dense_solve<T: Scalar>(a: &mut [T], b: &mut [T], k: usize, m: usize) -> crate::error::Result<()> {
    for col in 0..k {
        let mut p = col;
        let mut best = a[col * k + col].modulus();
        for r in col + 1..k {
            let v = a[r * k + col].modulus();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(crate::error::Error::Numerical("singular dense system".into()));
        }
        if p != col {
            for j in 0..k {
                a.swap(col * k + j, p * k + j);
            }
            for j in 0..m {
                b.swap(col * m + j, p * m + j);
            }
        }
        let piv = a[col * k + col];
        for r in col + 1..k {
            let l = a[r * k + col] / piv;
            if l.modulus() == 0.0 {
                continue;
            }
            for j in col..k {
                let t = a[col * k + j];
                a[r * k + j] -= l * t;
            }
            for j in 0..m {
                let t = b[col * m + j];
                b[r * m + j] -= l * t;
            }
        }
    }
    for col in (0..k).rev() {
        let piv = a[col * k + col];
        for j in 0..m {
            let mut s = b[col * m + j];
            for c in col + 1..k {
                s -= a[col * k + c] * b[c * m + j];
            }
            b[col * m + j] = s / piv;
        }
    }
    Ok(())
}
