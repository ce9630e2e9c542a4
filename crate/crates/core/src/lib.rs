//! Constrained kernelized bandit toolkit.
//!
//! A learner repeatedly picks one point from a finite candidate domain and
//! observes two noisy scalars: a reward to maximize and a cost that should
//! stay non-positive on average. Both signals are modeled with Gaussian
//! process surrogates; optimistic (or randomized) estimates built from the
//! posteriors feed a primal-dual acquisition rule that trades reward against
//! a running multiplier on the constraint. A Lyapunov-drift variant replaces
//! the projected multiplier with a virtual queue.
//!
//! Module map:
//!
//! * [`kernel`] — kernel families, Gram matrices, information gain, domains.
//! * [`gp`] — incremental GP posterior (rank-1 Cholesky extension per
//!   observation) with cached statistics over a tracked domain.
//! * [`explore`] — confidence-width schedule and the UCB / Thompson /
//!   randomized-UCB estimate generators, plus truncation.
//! * [`primal_dual`] — the constrained bandit loop with a projected dual
//!   multiplier, and a horizon-doubling wrapper.
//! * [`lyapunov`] — the virtual-queue variant and its per-round drift check.
//! * [`env`] — synthetic RKHS-function environments, CSV-backed dataset
//!   environments, noise models, Slater margin, and the best-feasible-mixture
//!   oracle.
//! * [`metrics`] — positive-part regret and violation series over run traces.
//! * [`harness`] — multi-trial experiment runner with CSV emission.
//! * [`config`] — TOML experiment configuration.

pub mod config;
pub mod env;
pub mod error;
pub mod explore;
pub mod gp;
pub mod harness;
pub mod kernel;
pub mod lyapunov;
pub mod metrics;
pub mod primal_dual;
pub mod record;

mod chol;

pub use error::{Error, Result};
