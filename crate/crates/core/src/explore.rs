//! Optimistic and randomized estimate generation.
//!
//! Each round the bandit loop turns the two GP posteriors into *estimate
//! vectors* over the domain — one per signal — and optimizes a scalarization
//! of those instead of the unknown truth. Three generators are supported:
//!
//! * **UCB**: `mu + sign * beta * sigma`. `sign = +1` is optimistic for a
//!   reward; `sign = -1` is optimistic for a cost (lower confidence bound).
//! * **Thompson sampling**: one joint posterior draw over the whole domain,
//!   covariance inflated by `beta^2`.
//! * **Randomized UCB**: a *single* scalar `Z` is drawn per round and applied
//!   as `mu + sign * Z * sigma` at every point, coupling the perturbation
//!   across the domain. `Z` comes from either a Gaussian with standard
//!   deviation `beta` or a uniform grid on `[0, 2 beta]`.
//!
//! The width `beta` follows the anytime schedule
//! `beta(gain) = B + R * sqrt(2 * (gain + 1 + ln(2 / alpha)))`, reading the
//! model's accumulated information gain; it never falls below the norm bound
//! `B`. Randomized strategies only help if they are optimistic often enough,
//! so [`ExplorationStrategy::check_anticoncentration`] estimates the
//! probability that a draw clears the one-sided `beta` width; the reference
//! floor used by the analysis is `1 / (4 e sqrt(pi)) ~= 0.0519`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::kernel::Domain;

/// Confidence-width schedule `beta(gain) = B + R sqrt(2 (gain + 1 + ln(2/alpha)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSchedule {
    norm_bound: f64,
    noise_scale: f64,
    confidence: f64,
}

impl BetaSchedule {
    /// `norm_bound` (B) and `noise_scale` (R) must be non-negative and
    /// finite; `confidence` (alpha) must lie in (0, 1).
    pub fn new(norm_bound: f64, noise_scale: f64, confidence: f64) -> Result<Self> {
        if !(norm_bound >= 0.0 && norm_bound.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "norm bound must be non-negative and finite, got {norm_bound}"
            )));
        }
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise scale must be non-negative and finite, got {noise_scale}"
            )));
        }
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::InvalidInput(format!(
                "confidence level must lie in (0, 1), got {confidence}"
            )));
        }
        Ok(Self {
            norm_bound,
            noise_scale,
            confidence,
        })
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// Width at a given accumulated information gain. Non-decreasing in the
    /// gain and never below the norm bound.
    pub fn beta(&self, gain: f64) -> f64 {
        debug_assert!(gain >= -1e-12, "information gain must be non-negative");
        self.norm_bound
            + self.noise_scale
                * (2.0 * (gain.max(0.0) + 1.0 + (2.0 / self.confidence).ln())).sqrt()
    }

    /// Width for the model's current round.
    pub fn beta_for(&self, model: &GpModel) -> f64 {
        self.beta(model.running_gain())
    }
}

/// Direction in which a confidence bound is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// Optimistic for a signal being maximized.
    Plus,
    /// Optimistic for a signal being minimized (lower confidence bound).
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Law of the shared perturbation scalar used by randomized UCB.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomizerDist {
    /// `Z ~ N(0, beta^2)`.
    Gaussian,
    /// `Z` uniform on the `points`-point grid `{0, 2 beta / (points - 1), ..., 2 beta}`.
    /// Requires at least two grid points.
    UniformDiscrete { points: usize },
}

/// Which estimate generator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Ucb { sign: Sign },
    ThompsonSampling,
    RandUcb { dist: RandomizerDist, sign: Sign },
}

/// An estimate generator: a strategy kind plus its width schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationStrategy {
    pub kind: StrategyKind,
    pub beta: BetaSchedule,
}

impl ExplorationStrategy {
    pub fn new(kind: StrategyKind, beta: BetaSchedule) -> Result<Self> {
        if let StrategyKind::RandUcb {
            dist: RandomizerDist::UniformDiscrete { points },
            ..
        } = kind
        {
            if points < 2 {
                return Err(Error::InvalidInput(format!(
                    "uniform randomizer grid needs at least 2 points, got {points}"
                )));
            }
        }
        Ok(Self { kind, beta })
    }

    /// Produces the estimate vector for the current round. Thompson sampling
    /// consumes one joint draw; randomized UCB consumes one scalar draw; UCB
    /// consumes no randomness.
    pub fn generate_estimate<R: Rng + ?Sized>(
        &self,
        model: &GpModel,
        domain: &Domain,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let beta = self.beta.beta_for(model);
        match self.kind {
            StrategyKind::Ucb { sign } => estimate_with_z(model, domain, sign.value() * beta),
            StrategyKind::ThompsonSampling => {
                model.posterior_joint_sample(domain.points(), beta, rng)
            }
            StrategyKind::RandUcb { dist, sign } => {
                let z = draw_randomizer(dist, beta, rng);
                estimate_with_z(model, domain, sign.value() * z)
            }
        }
    }

    /// Monte Carlo estimate of the probability that one draw of the
    /// strategy's randomizer is optimistic by at least the one-sided width
    /// `beta` (evaluated at zero gain, i.e. the first round). Deterministic
    /// UCB has no randomizer and is rejected.
    pub fn check_anticoncentration<R: Rng + ?Sized>(
        &self,
        draws: usize,
        rng: &mut R,
    ) -> Result<f64> {
        if draws == 0 {
            return Err(Error::InvalidInput("anti-concentration check needs draws >= 1".into()));
        }
        let beta = self.beta.beta(0.0);
        let hits = match self.kind {
            StrategyKind::Ucb { .. } => {
                return Err(Error::InvalidInput(
                    "UCB is deterministic; anti-concentration applies to randomized strategies"
                        .into(),
                ));
            }
            StrategyKind::ThompsonSampling => {
                let normal = Normal::new(0.0, beta).expect("positive width");
                (0..draws)
                    .filter(|_| normal.sample(rng) >= beta)
                    .count()
            }
            StrategyKind::RandUcb { dist, .. } => (0..draws)
                .filter(|_| draw_randomizer(dist, beta, rng) >= beta)
                .count(),
        };
        Ok(hits as f64 / draws as f64)
    }
}

/// `mu + z * sigma` over the domain; the shared-scalar core of UCB and
/// randomized UCB.
fn estimate_with_z(model: &GpModel, domain: &Domain, z: f64) -> Result<Vec<f64>> {
    let (mean, std) = model.posterior_table(domain)?;
    Ok(mean
        .into_iter()
        .zip(std)
        .map(|(m, s)| m + z * s)
        .collect())
}

/// One draw of the randomizer in its canonical (reward-side) orientation.
fn draw_randomizer<R: Rng + ?Sized>(dist: RandomizerDist, beta: f64, rng: &mut R) -> f64 {
    match dist {
        RandomizerDist::Gaussian => {
            if beta == 0.0 {
                0.0
            } else {
                Normal::new(0.0, beta).expect("positive width").sample(rng)
            }
        }
        RandomizerDist::UniformDiscrete { points } => {
            let i = rng.random_range(0..points);
            2.0 * beta * i as f64 / (points - 1) as f64
        }
    }
}

/// Probability floor the anti-concentration analysis asks of a randomizer:
/// `1 / (4 e sqrt(pi))`.
pub fn anticoncentration_floor() -> f64 {
    1.0 / (4.0 * std::f64::consts::E * std::f64::consts::PI.sqrt())
}

/// Clamps every entry into `[-bound, bound]`. The simulation loop applies
/// this with the known range bounds before any estimate is consumed, which is
/// what keeps dual updates and drift arguments bounded.
pub fn truncate(values: &[f64], bound: f64) -> Vec<f64> {
    assert!(bound > 0.0, "truncation bound must be positive, got {bound}");
    values.iter().map(|v| v.clamp(-bound, bound)).collect()
}
