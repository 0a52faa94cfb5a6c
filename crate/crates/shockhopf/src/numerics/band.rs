use super::{dense_solve, Scalar};
use crate::error::{Error, Result};

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, stored by row.
///
/// Each row reserves `kl` extra slots to the right so the LU factorization
/// can fill in place under partial pivoting.
#[derive(Clone, Debug)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![T::zero(); n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.kl
    }

    pub fn upper(&self) -> usize {
        self.ku
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            T::zero()
        }
    }

    /// Sets an entry; panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut s = T::zero();
                for j in self.row_range(i) {
                    s += self.data[self.slot(i, j)] * x[j];
                }
                s
            })
            .collect()
    }

    /// `xᵀA` as a vector, i.e. `Aᵀx`.
    pub fn matvec_transpose(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for i in 0..self.n {
            for j in self.row_range(i) {
                out[j] += self.data[self.slot(i, j)] * x[i];
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = BandMatrix::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.row_range(i) {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `αA + βI`.
    pub fn scaled_shift(&self, alpha: T, beta: T) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = *v * alpha;
        }
        for i in 0..self.n {
            out.add(i, i, beta);
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> BandMatrix<U> {
        BandMatrix {
            n: self.n,
            kl: self.kl,
            ku: self.ku,
            width: self.width,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn factor(&self) -> Result<BandLu<T>> {
        BandLu::new(self.clone())
    }
}

/// LU factorization of a banded matrix with row partial pivoting.
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    a: BandMatrix<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    pub fn new(mut a: BandMatrix<T>) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let reach = a.kl + a.ku;
        let mut piv = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl + 1).min(n);
            let mut p = k;
            let mut best = a.data[a.slot(k, k)].modulus();
            for i in k + 1..last_row {
                let v = a.data[a.slot(i, k)].modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Numerical(format!("singular banded matrix at column {k}")));
            }
            piv[k] = p;
            let last_col = (k + reach + 1).min(n);
            if p != k {
                for j in k..last_col {
                    let (sk, sp) = (a.slot(k, j), a.slot(p, j));
                    a.data.swap(sk, sp);
                }
            }
            let pivot = a.data[a.slot(k, k)];
            for i in k + 1..last_row {
                let si = a.slot(i, k);
                let l = a.data[si] / pivot;
                a.data[si] = l;
                if l.modulus() == 0.0 {
                    continue;
                }
                for j in k + 1..last_col {
                    let t = a.data[a.slot(k, j)];
                    let s = a.slot(i, j);
                    a.data[s] -= l * t;
                }
            }
        }
        Ok(Self { a, piv })
    }

    pub fn dim(&self) -> usize {
        self.a.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let a = &self.a;
        let n = a.n;
        let reach = a.kl + a.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..(k + a.kl + 1).min(n) {
                b[i] -= a.data[a.slot(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..(k + reach + 1).min(n) {
                s -= a.data[a.slot(k, j)] * b[j];
            }
            b[k] = s / a.data[a.slot(k, k)];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solver for `B + U Vᵀ` with `B` banded and `U`, `V` thin (Woodbury identity).
#[derive(Clone, Debug)]
pub struct LowRankSolver<T> {
    lu: BandLu<T>,
    v: Vec<Vec<T>>,
    binv_u: Vec<Vec<T>>,
    cap: Vec<T>,
}

impl<T: Scalar> LowRankSolver<T> {
    /// `u[k]` and `v[k]` are the columns of `U` and `V`.
    pub fn new(b: &BandMatrix<T>, u: Vec<Vec<T>>, v: Vec<Vec<T>>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::Dimension("low-rank factors differ in rank".into()));
        }
        let lu = b.factor()?;
        let binv_u: Vec<Vec<T>> = u.iter().map(|c| lu.solve(c)).collect();
        let k = u.len();
        let mut cap = vec![T::zero(); k * k];
        for i in 0..k {
            for j in 0..k {
                cap[i * k + j] = super::dotu(&v[i], &binv_u[j]);
            }
            cap[i * k + i] += T::one();
        }
        if k > 0 {
            let mut probe = cap.clone();
            let mut rhs = vec![T::zero(); k];
            dense_solve(&mut probe, &mut rhs, k, 1)?;
        }
        Ok(Self { lu, v, binv_u, cap })
    }

    pub fn rank(&self) -> usize {
        self.v.len()
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let mut y = self.lu.solve(rhs);
        let k = self.v.len();
        if k == 0 {
            return y;
        }
        let mut c = self.cap.clone();
        let mut z: Vec<T> = self.v.iter().map(|vi| super::dotu(vi, &y)).collect();
        dense_solve(&mut c, &mut z, k, 1).expect("capacitance matrix checked at construction");
        for (j, col) in self.binv_u.iter().enumerate() {
            let zj = z[j];
            for (yi, ci) in y.iter_mut().zip(col) {
                *yi -= *ci * zj;
            }
        }
        y
    }
}
