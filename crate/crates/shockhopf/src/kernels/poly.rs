//! Exact derivatives of moving Gaussians `z^p t^{q/2} e^{−z²/4t}` with
//! `z = x − y − at`, kept as sparse polynomials in `z` and `t^{1/2}`.

use std::collections::BTreeMap;

/// `Σ c · z^p · t^{q/2} · e^{−z²/4t}`, keyed by `(p, q)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaussPoly {
    terms: BTreeMap<(i32, i32), f64>,
}

impl GaussPoly {
    pub fn monomial(c: f64, p: i32, q: i32) -> Self {
        let mut g = Self::default();
        g.push(c, p, q);
        g
    }

    /// The kernel `t^{−1/2} e^{−z²/4t}` itself.
    pub fn heat() -> Self {
        Self::monomial(1.0, 0, -1)
    }

    fn push(&mut self, c: f64, p: i32, q: i32) {
        if c == 0.0 || p < 0 {
            return;
        }
        *self.terms.entry((p, q)).or_insert(0.0) += c;
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(p, q), &c) in &other.terms {
            out.push(c, p, q);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::default();
        for (&(p, q), &c) in &self.terms {
            out.push(s * c, p, q);
        }
        out
    }

    /// `∂_y`, using `∂_y z = −1`.
    pub fn dy(&self) -> Self {
        let mut out = Self::default();
        for (&(p, q), &c) in &self.terms {
            out.push(-c * p as f64, p - 1, q);
            out.push(0.5 * c, p + 1, q - 2);
        }
        out
    }

    /// `∂_t` for transport speed `a`, using `∂_t z = −a`.
    pub fn dt(&self, a: f64) -> Self {
        let mut out = Self::default();
        for (&(p, q), &c) in &self.terms {
            let s = 0.5 * q as f64;
            out.push(-a * p as f64 * c, p - 1, q);
            out.push(s * c, p, q - 2);
            out.push(0.5 * a * c, p + 1, q - 2);
            out.push(0.25 * c, p + 2, q - 4);
        }
        out
    }

    pub fn eval(&self, z: f64, t: f64) -> f64 {
        let rt = t.sqrt();
        let e = (-z * z / (4.0 * t)).exp();
        if e == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for (&(p, q), &c) in &self.terms {
            s += c * z.powi(p) * rt.powi(q);
        }
        s * e
    }
}
