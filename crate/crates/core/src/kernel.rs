//! Kernel functions and finite candidate domains.
//!
//! Everything downstream optimizes over a fixed, finite set of candidate
//! points, so a "domain" here is just a validated list of equal-dimension
//! vectors. Kernels come in three analytic families — squared-exponential,
//! Matérn at the half-integer smoothness orders with closed forms, and linear
//! — plus a precomputed PSD matrix for dataset-backed domains where
//! similarity is estimated from data rather than given by a formula.
//!
//! The analytic kernels are normalized to `k(x, x) = 1`; the linear kernel
//! instead requires inputs inside the (closed) unit ball so that
//! `k(x, x) <= 1`. Downstream confidence scaling and information-gain
//! accounting rely on this unit-diagonal convention, which is why the linear
//! kernel rejects points outside the ball instead of silently accepting them.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::chol::PackedLower;
use crate::error::{Error, Result};

/// Tolerance for the linear kernel's unit-ball check and for validating
/// precomputed kernel matrices.
const UNIT_TOL: f64 = 1e-9;

/// Smoothness order of the Matérn family. Only the half-integer orders with
/// closed-form expressions are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaternOrder {
    /// Exponential kernel, `exp(-r/l)`.
    Half,
    /// `(1 + sqrt(3) r/l) exp(-sqrt(3) r/l)`.
    ThreeHalves,
    /// `(1 + sqrt(5) r/l + 5 r^2 / (3 l^2)) exp(-sqrt(5) r/l)`.
    FiveHalves,
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    SquaredExponential { lengthscale: f64 },
    Matern { lengthscale: f64, order: MaternOrder },
    Linear,
    /// Kernel matrix over an index domain: point `[i]` refers to row/column
    /// `i`. Must be symmetric PSD with unit diagonal.
    Precomputed(Arc<DMatrix<f64>>),
}

/// A positive-semidefinite kernel together with its expected input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: Family,
    dim: usize,
}

impl KernelSpec {
    /// Squared-exponential kernel `exp(-||x - y||^2 / (2 l^2))`.
    pub fn squared_exponential(lengthscale: f64, dim: usize) -> Result<Self> {
        check_lengthscale(lengthscale)?;
        check_dim(dim)?;
        Ok(Self {
            family: Family::SquaredExponential { lengthscale },
            dim,
        })
    }

    /// Matérn kernel at one of the half-integer smoothness orders.
    pub fn matern(lengthscale: f64, order: MaternOrder, dim: usize) -> Result<Self> {
        check_lengthscale(lengthscale)?;
        check_dim(dim)?;
        Ok(Self {
            family: Family::Matern { lengthscale, order },
            dim,
        })
    }

    /// Linear kernel `<x, y>`, restricted to the unit ball.
    pub fn linear(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            family: Family::Linear,
            dim,
        })
    }

    /// Wraps an explicit kernel matrix over the index domain `[0], [1], ...`.
    /// The matrix must be square, symmetric, and have a unit diagonal.
    pub fn precomputed(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || n == 0 {
            return Err(Error::InvalidInput(format!(
                "precomputed kernel must be square and non-empty, got {}x{}",
                n,
                matrix.ncols()
            )));
        }
        for i in 0..n {
            if (matrix[(i, i)] - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidInput(format!(
                    "precomputed kernel diagonal entry {} is {}, expected 1",
                    i,
                    matrix[(i, i)]
                )));
            }
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > UNIT_TOL {
                    return Err(Error::InvalidInput(format!(
                        "precomputed kernel is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            family: Family::Precomputed(Arc::new(matrix)),
            dim: 1,
        })
    }

    /// Expected input dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluates `k(x, y)`.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        match &self.family {
            Family::SquaredExponential { lengthscale } => {
                let d2 = sq_dist(x, y);
                Ok((-d2 / (2.0 * lengthscale * lengthscale)).exp())
            }
            Family::Matern { lengthscale, order } => {
                let r = sq_dist(x, y).sqrt() / lengthscale;
                Ok(match order {
                    MaternOrder::Half => (-r).exp(),
                    MaternOrder::ThreeHalves => {
                        let s = 3.0_f64.sqrt() * r;
                        (1.0 + s) * (-s).exp()
                    }
                    MaternOrder::FiveHalves => {
                        let s = 5.0_f64.sqrt() * r;
                        (1.0 + s + 5.0 * r * r / 3.0) * (-s).exp()
                    }
                })
            }
            Family::Linear => {
                check_unit_ball(x)?;
                check_unit_ball(y)?;
                Ok(dot(x, y))
            }
            Family::Precomputed(m) => {
                let i = index_of(x[0], m.nrows())?;
                let j = index_of(y[0], m.nrows())?;
                Ok(m[(i, j)])
            }
        }
    }

    /// Gram matrix `K[i][j] = k(points[i], points[j])`. Exactly symmetric by
    /// construction: the upper triangle is mirrored, not recomputed.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let n = points.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.evaluate(&points[i], &points[j])?;
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// Information gain of observing `points` under noise ridge `lambda`:
    /// `0.5 * ln det(I + K / lambda)`, computed through a Cholesky
    /// factorization of `K + lambda I`. Empty input yields zero. Appending
    /// points never decreases the value.
    pub fn information_gain(&self, points: &[Vec<f64>], lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise ridge lambda must be positive, got {lambda}"
            )));
        }
        if points.is_empty() {
            return Ok(0.0);
        }
        let k = self.gram(points)?;
        let factor = PackedLower::from_matrix(&k, lambda)?;
        Ok(factor.log_det_half() - points.len() as f64 * 0.5 * lambda.ln())
    }
}

/// A finite, non-empty set of candidate points of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl Domain {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidInput("domain must contain at least one point".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidInput("domain points must have dimension >= 1".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("domain points must be finite".into()));
            }
        }
        Ok(Self { points, dim })
    }

    /// Uniform grid of `n >= 2` points on `[0, 1]`, endpoints included.
    pub fn grid_1d(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "1-d grid needs at least 2 points, got {n}"
            )));
        }
        let step = 1.0 / (n - 1) as f64;
        Self::new((0..n).map(|i| vec![i as f64 * step]).collect())
    }

    /// Index domain `[0], [1], ..., [n-1]` for precomputed kernels.
    pub fn indices(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("index domain must be non-empty".into()));
        }
        Self::new((0..n).map(|i| vec![i as f64]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // enforced non-empty at construction
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

fn check_lengthscale(l: f64) -> Result<()> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "lengthscale must be positive and finite, got {l}"
        )))
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidInput("input dimension must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn check_unit_ball(x: &[f64]) -> Result<()> {
    let n = dot(x, x);
    if n <= 1.0 + UNIT_TOL {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "linear kernel input has squared norm {n}, must lie in the unit ball"
        )))
    }
}

fn index_of(v: f64, n: usize) -> Result<usize> {
    let r = v.round();
    if (v - r).abs() > UNIT_TOL || r < 0.0 || r >= n as f64 {
        return Err(Error::InvalidInput(format!(
            "precomputed kernel expects integer indices in [0, {n}), got {v}"
        )));
    }
    Ok(r as usize)
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y.iter())
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}
