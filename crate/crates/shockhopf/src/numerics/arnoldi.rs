use super::{dotc, norm2};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Ritz values of an operator from `m` Arnoldi steps started at `v0`.
///
/// Breakdown (an invariant subspace) shortens the Krylov basis gracefully.
pub fn ritz_values<F>(apply: F, v0: &[Complex64], m: usize) -> Result<Vec<Complex64>>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = v0.len();
    let m = m.min(n);
    let nv = norm2(v0);
    if nv == 0.0 {
        return Err(Error::Argument("zero Arnoldi start vector".into()));
    }
    let mut basis: Vec<Vec<Complex64>> = vec![v0.iter().map(|x| x / nv).collect()];
    let mut h = DMatrix::<Complex64>::zeros(m + 1, m);
    let mut size = m;
    for j in 0..m {
        let mut w = apply(&basis[j]);
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dotc(q, &w);
                h[(i, j)] += c;
                for (wk, qk) in w.iter_mut().zip(q) {
                    *wk -= c * qk;
                }
            }
        }
        let nw = norm2(&w);
        h[(j + 1, j)] = Complex64::new(nw, 0.0);
        if nw < 1e-13 {
            size = j + 1;
            break;
        }
        if j + 1 < m {
            basis.push(w.iter().map(|x| x / nw).collect());
        }
    }
    let hm = h.view((0, 0), (size, size)).into_owned();
    let schur = hm.schur();
    let (_, t) = schur.unpack();
    Ok((0..size).map(|i| t[(i, i)]).collect())
}

/// Inverse iteration with a fixed shift, given a solver for `(A − σ)x = b`.
/// Returns the normalized vector after `iters` sweeps.
pub fn inverse_iteration<F>(solve: F, v0: &[Complex64], iters: usize) -> Vec<Complex64>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let mut v: Vec<Complex64> = v0.to_vec();
    let n0 = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    for _ in 0..iters {
        let mut w = solve(&v);
        let nw = norm2(&w);
        w.iter_mut().for_each(|x| *x /= nw);
        v = w;
    }
    v
}
