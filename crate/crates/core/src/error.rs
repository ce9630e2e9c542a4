//! Crate-wide error type.
//!
//! One enum covers the whole pipeline so that callers (in particular the CLI)
//! can map failures to coarse categories: bad inputs or configuration,
//! numerical degeneracy inside a factorization, infeasible optimization
//! problems, and plain I/O.

use thiserror::Error;

/// Errors produced by kernel evaluation, posterior updates, simulation and
/// the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong length for the operation.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Parameters or arguments outside their documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A factorization or variance computation left the numerically safe
    /// region (non-positive pivot, variance below the negative tolerance).
    #[error("numerical degeneracy: {context} (offending value {value:e})")]
    Degeneracy { context: &'static str, value: f64 },

    /// The linear program over action distributions has no feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Synthetic environment generation exhausted its retry budget without
    /// finding an instance with enough constraint slack.
    #[error("environment generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: &'static str },

    /// A dataset cell could not be used; positions are 1-based and count the
    /// header as row 1.
    #[error("dataset error at row {row}, column {col}: {msg}")]
    Dataset { row: usize, col: usize, msg: String },

    /// Configuration file or CLI override problems.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::Degeneracy { .. } => 3,
            _ => 1,
        }
    }
}
