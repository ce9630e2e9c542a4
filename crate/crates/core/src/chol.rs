//! Small dense Cholesky helpers shared by the kernel and posterior modules.
//!
//! The posterior update never refactorizes: it appends one row to a packed
//! lower-triangular factor per observation (O(t^2) work), which is where all
//! of the solver's speed comes from. Nothing here is clever beyond that; the
//! matrices involved are ridge-regularized Gram matrices, so pivots are
//! bounded below by the ridge unless something has genuinely gone wrong.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Lower-triangular factor stored row-packed: row `i` occupies `i + 1`
/// consecutive entries ending in the diagonal pivot.
#[derive(Debug, Clone, Default)]
pub(crate) struct PackedLower {
    n: usize,
    data: Vec<f64>,
}

impl PackedLower {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * (i + 1) / 2 + i]
    }

    /// Appends one row so that the factor now covers the matrix extended by
    /// the column `cross` and diagonal entry `diag`. `cross` is consumed and
    /// must hold the cross terms against the existing rows, in order.
    ///
    /// Returns the new pivot. Fails with a degeneracy error when the Schur
    /// complement `diag - ||v||^2` is not strictly positive.
    pub fn extend(&mut self, mut cross: Vec<f64>, diag: f64) -> Result<f64> {
        if cross.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: cross.len(),
            });
        }
        self.solve_lower(&mut cross);
        let sq: f64 = cross.iter().map(|v| v * v).sum();
        let pivot_sq = diag - sq;
        if !(pivot_sq > 0.0) {
            return Err(Error::Degeneracy {
                context: "non-positive Cholesky pivot while extending factor",
                value: pivot_sq,
            });
        }
        let pivot = pivot_sq.sqrt();
        self.data.extend_from_slice(&cross);
        self.data.push(pivot);
        self.n += 1;
        Ok(pivot)
    }

    /// In-place forward substitution: overwrites `b` with `L^-1 b`.
    pub fn solve_lower(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let dot: f64 = row[..i].iter().zip(b[..i].iter()).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - dot) / row[i];
        }
    }

    /// In-place back substitution: overwrites `b` with `L^-T b`. The model
    /// layer works with half-solved vectors throughout, so only the
    /// reconstruction tests need the second triangle.
    #[cfg(test)]
    pub fn solve_upper(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in (0..self.n).rev() {
            let x = b[i] / self.diag(i);
            b[i] = x;
            let row = self.row(i);
            for (j, l) in row[..i].iter().enumerate() {
                b[j] -= l * x;
            }
        }
    }

    /// Factorizes `m + ridge * I` by repeated row extension.
    pub fn from_matrix(m: &DMatrix<f64>, ridge: f64) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.ncols(),
            });
        }
        let mut f = PackedLower::new();
        for i in 0..n {
            let cross: Vec<f64> = (0..i).map(|j| m[(i, j)]).collect();
            f.extend(cross, m[(i, i)] + ridge)?;
        }
        Ok(f)
    }

    /// Sum of log pivots, i.e. `0.5 * ln det` of the factored matrix.
    pub fn log_det_half(&self) -> f64 {
        (0..self.n).map(|i| self.diag(i).ln()).sum()
    }

    /// Dense reconstruction `L L^T`; test and diagnostics helper.
    #[allow(dead_code)]
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (self.row(i), self.row(j));
            let m = (i.min(j)) + 1;
            a[..m].iter().zip(b[..m].iter()).map(|(x, y)| x * y).sum()
        })
    }
}

/// Cholesky factor of a positive *semi*definite matrix, with rank deficiency
/// handled by zeroing columns whose pivot falls below `drop_tol`.
///
/// Used for joint posterior sampling, where duplicate or near-duplicate query
/// points make the covariance singular on purpose: a dropped column means the
/// corresponding direction gets no fresh noise, so exact duplicates receive
/// (numerically) identical samples instead of jitter-scale disagreement.
pub(crate) fn semidefinite_factor(m: &DMatrix<f64>, drop_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    debug_assert_eq!(m.ncols(), n);
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < drop_tol {
            continue; // column stays zero: no noise along this direction
        }
        let pivot = d.sqrt();
        l[(j, j)] = pivot;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / pivot;
        }
    }
    l
}
