use super::{assemble_linearized, DiscreteLinearOperator};
use crate::error::{Error, Result};
use crate::numerics::dense_solve;
use crate::profiles::{solve_profile, Exemplar2x2};
use crate::spaces::Grid1D;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Low-rank term `P = R Wᵀ` that makes `span V` invariant under `L + P` with
/// matrix `Λ`: `(L + P)V = VΛ`.
///
/// `R = VΛ − LV`, and `W` is the dual basis of `V` inside `span{V, ψ₀}` with
/// `Wᵀψ₀ = 0`, so the translational mode is left alone. The columns of `V`
/// have zero discrete mass, hence so do those of `R`, and `L + P` keeps the
/// discrete conservation property.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedModes {
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    /// `Λ` row-major, `k×k`.
    pub lambda: Vec<f64>,
}

impl PlantedModes {
    /// Plants `Λ` on `span V` of the unplanted operator `base`.
    pub fn new(base: &DiscreteLinearOperator, v: Vec<Vec<f64>>, lambda: &DMatrix<f64>) -> Result<Self> {
        let k = v.len();
        let m = base.dim();
        if lambda.nrows() != k || lambda.ncols() != k || v.iter().any(|c| c.len() != m) {
            return Err(Error::Dimension("planted modes and Λ disagree in size".into()));
        }
        let base = base.without_planted();
        let mut cols = v.clone();
        if let Some(z) = base.zero_mode() {
            cols.push(z.mode.values.clone());
        }
        let q = cols.len();
        let mut gram: Vec<f64> = (0..q * q).map(|ij| dot(&cols[ij / q], &cols[ij % q])).collect();
        let mut rhs = vec![0.0; q * k];
        for j in 0..k {
            rhs[j * k + j] = 1.0;
        }
        dense_solve(&mut gram, &mut rhs, q, k).map_err(|_| Error::Numerical("planted modes are linearly dependent".into()))?;
        let w: Vec<Vec<f64>> = (0..k)
            .map(|j| {
                let mut c = vec![0.0; m];
                for (p, col) in cols.iter().enumerate() {
                    let s = rhs[p * k + j];
                    c.iter_mut().zip(col).for_each(|(a, b)| *a += s * b);
                }
                c
            })
            .collect();
        let lv: Vec<Vec<f64>> = v.iter().map(|c| base.apply(c)).collect();
        let r: Vec<Vec<f64>> = (0..k)
            .map(|col| {
                let mut out: Vec<f64> = lv[col].iter().map(|x| -x).collect();
                for (j, vj) in v.iter().enumerate() {
                    let l = lambda[(j, col)];
                    out.iter_mut().zip(vj).for_each(|(a, b)| *a += l * b);
                }
                out
            })
            .collect();
        Ok(Self { v, w, r, lambda: lambda.transpose().iter().copied().collect() })
    }

    pub fn rank(&self) -> usize {
        self.v.len()
    }

    pub fn lambda_matrix(&self) -> DMatrix<f64> {
        let k = self.rank();
        DMatrix::from_row_slice(k, k, &self.lambda)
    }

    /// `Wᵀx`.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        self.w.iter().map(|w| dot(w, x)).collect()
    }

    /// `Px = R Wᵀx`, accumulated into `out`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (w, r) in self.w.iter().zip(&self.r) {
            let s = dot(w, x);
            out.iter_mut().zip(r).for_each(|(o, rv)| *o += s * rv);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shape and rates of a planted crossing pair: `γ(ε) = gamma_rate·ε`,
/// `τ(ε) = tau0 + tau_rate·ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingDesign {
    pub gamma_rate: f64,
    pub tau0: f64,
    pub tau_rate: f64,
    pub center: f64,
    pub width: f64,
}

impl Default for CrossingDesign {
    fn default() -> Self {
        Self { gamma_rate: 1.0, tau0: 1.0, tau_rate: 0.0, center: 0.0, width: 1.0 }
    }
}

impl CrossingDesign {
    pub fn gamma(&self, eps: f64) -> f64 {
        self.gamma_rate * eps
    }

    pub fn tau(&self, eps: f64) -> f64 {
        self.tau0 + self.tau_rate * eps
    }

    /// `Λ = [[γ, τ], [−τ, γ]]`, eigenvalues `γ ± iτ` with eigenvector `(1, i)`.
    pub fn lambda(&self, eps: f64) -> DMatrix<f64> {
        let (g, t) = (self.gamma(eps), self.tau(eps));
        DMatrix::from_row_slice(2, 2, &[g, t, -t, g])
    }

    /// The first `k` bump modes; the pair uses `k = 2`.
    pub fn modes(&self, grid: Grid1D, n: usize, k: usize) -> Vec<Vec<f64>> {
        bump_modes(grid, n, k, self.center, self.width)
    }

    /// Plants the pair at `ε` into `base`.
    pub fn plant(&self, base: &DiscreteLinearOperator) -> Result<DiscreteLinearOperator> {
        let eps = base.eps();
        let modes = PlantedModes::new(base, self.modes(base.grid(), base.components(), 2), &self.lambda(eps))?;
        base.without_planted().with_planted(modes)
    }
}

/// Zero-mass modes `D₀(x^p g)` with `g` a Gaussian bump, cycling through the
/// components: mode `j` lives in component `j mod n` with `p = ⌊j/n⌋`. The
/// central difference telescopes, so the discrete mass vanishes up to the
/// bump's size at the grid ends.
pub fn bump_modes(grid: Grid1D, n: usize, k: usize, center: f64, width: f64) -> Vec<Vec<f64>> {
    let m = grid.len();
    let h = grid.h();
    (0..k)
        .map(|j| {
            let (c, p) = (j % n, (j / n) as i32);
            let s = |i: isize| {
                let x = grid.x(0) + i as f64 * h - center;
                x.powi(p) * (-0.5 * (x / width).powi(2)).exp()
            };
            let mut col = vec![0.0; m * n];
            for i in 0..m {
                col[i * n + c] = (s(i as isize + 1) - s(i as isize - 1)) / (2.0 * h);
            }
            col
        })
        .collect()
}

/// Linearization of the shipped 2×2 exemplar at `ε` with the crossing pair
/// of `design` planted.
pub fn exemplar_operator(design: &CrossingDesign, eps: f64, grid: Grid1D) -> Result<DiscreteLinearOperator> {
    let flux = Exemplar2x2::default();
    let profile = solve_profile(&flux, eps, grid, None)?;
    let base = assemble_linearized(&profile, &flux)?;
    design.plant(&base)
}
