//! Virtual-queue (Lyapunov drift) variant of the constrained loop.
//!
//! Instead of a projected dual multiplier, this loop maintains a virtual
//! queue `Q` measuring accumulated (estimated) constraint debt:
//!
//! ```text
//! Q(1) = 0
//! x_t  = argmax f_est(x) - (Q(t) / V) * g_est(x)
//! Q(t+1) = max(0, Q(t) + g_est(x_t) + slack)
//! ```
//!
//! The queue is *not* capped above — stability comes from the drift of the
//! quadratic Lyapunov function `L(Q) = Q^2 / 2`, not from a projection. The
//! scalarization is the primal-dual one evaluated at `phi = Q/V`, so the two
//! loops share their selection rule exactly.
//!
//! [`drift_check`] verifies the one-round drift inequality underlying the
//! analysis: for the queue produced by the *selected* action and any
//! comparison distribution `pi` over the domain,
//!
//! ```text
//! Q(t+1)^2/2 - Q(t)^2/2 <= -V (E_pi[f_est] - f_est(x_t))
//!                          + (G + slack)^2 / 2
//!                          + Q(t) (E_pi[g_est] + slack)
//! ```
//!
//! The guarantee analysis behind this loop covers deterministic UCB
//! estimates; other strategies run fine but are flagged as unanalyzed by
//! [`is_analyzed_strategy`] so harnesses can surface that.

use crate::env::BanditEnv;
use crate::error::{Error, Result};
use crate::explore::{truncate, ExplorationStrategy, StrategyKind};
use crate::gp::GpModel;
use crate::primal_dual::{select_action, RunRngs, StepDetail};
use crate::record::RunRecord;

/// Slack validation allows this much numerical headroom over `delta / 2`.
const SLACK_TOL: f64 = 1e-12;

/// Parameters of one virtual-queue run. The primal-dual `rho` has no
/// counterpart here: the queue is unbounded by design.
#[derive(Debug, Clone)]
pub struct LyapConfig {
    pub horizon: usize,
    /// Reward weight `V > 0` in the scalarization `V f - Q g` (equivalently
    /// the divisor in `phi = Q/V`).
    pub v: f64,
    /// Constraint tightening `slack >= 0`; validated against the Slater
    /// margin when positive.
    pub slack: f64,
    pub reward_bound: f64,
    pub cost_bound: f64,
    pub lambda: f64,
    pub reward_strategy: ExplorationStrategy,
    pub cost_strategy: ExplorationStrategy,
}

impl LyapConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v, strict) in [
            ("v", self.v, true),
            ("slack", self.slack, false),
            ("reward bound", self.reward_bound, true),
            ("cost bound", self.cost_bound, true),
            ("lambda", self.lambda, true),
        ] {
            let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "{name} must be {} and finite, got {v}",
                    if strict { "positive" } else { "non-negative" }
                )));
            }
        }
        Ok(())
    }
}

/// True for the strategies the queue-stability analysis covers.
pub fn is_analyzed_strategy(kind: &StrategyKind) -> bool {
    matches!(kind, StrategyKind::Ucb { .. })
}

/// One queue update: add the estimated constraint debt, floor at zero.
pub fn queue_update(queue: f64, cost_est_at_action: f64, slack: f64) -> f64 {
    debug_assert!(queue >= 0.0);
    (queue + cost_est_at_action + slack).max(0.0)
}

/// Argmax of `reward_est - (queue / v) * cost_est`; identical to the
/// primal-dual selection at multiplier `queue / v`, ties to lowest index.
pub fn lyap_select_action(
    reward_est: &[f64],
    cost_est: &[f64],
    queue: f64,
    v: f64,
) -> Result<usize> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "v must be positive and finite, got {v}"
        )));
    }
    select_action(reward_est, cost_est, queue / v)
}

/// Verifies the one-round drift inequality for queue values `queue_before`
/// -> `queue_after`, the round's truncated estimates, the selected action,
/// and a comparison distribution `pi` over the domain. Returns whether the
/// inequality holds within `1e-9`.
pub fn drift_check(
    queue_before: f64,
    queue_after: f64,
    reward_est: &[f64],
    cost_est: &[f64],
    action: usize,
    pi: &[f64],
    config: &LyapConfig,
) -> Result<bool> {
    let n = reward_est.len();
    if n == 0 || cost_est.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cost_est.len(),
        });
    }
    if pi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pi.len(),
        });
    }
    if action >= n {
        return Err(Error::InvalidInput(format!(
            "action index {action} out of range for {n} estimates"
        )));
    }
    let total: f64 = pi.iter().sum();
    if pi.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(
            "comparison distribution must be non-negative and sum to 1".into(),
        ));
    }
    if queue_before < 0.0 || queue_after < 0.0 {
        return Err(Error::InvalidInput("queue lengths must be non-negative".into()));
    }
    let ef: f64 = pi.iter().zip(reward_est).map(|(p, f)| p * f).sum();
    let eg: f64 = pi.iter().zip(cost_est).map(|(p, g)| p * g).sum();
    let drift = 0.5 * queue_after * queue_after - 0.5 * queue_before * queue_before;
    let slack_sq = config.cost_bound + config.slack;
    let bound = -config.v * (ef - reward_est[action])
        + 0.5 * slack_sq * slack_sq
        + queue_before * (eg + config.slack);
    Ok(drift <= bound + 1e-9)
}

/// Mutable state of a virtual-queue run.
#[derive(Debug, Clone)]
pub struct LyapState {
    pub queue: f64,
    pub reward_model: GpModel,
    pub cost_model: GpModel,
    /// Rounds completed so far.
    pub round: usize,
}

impl LyapState {
    pub fn new(config: &LyapConfig, env: &BanditEnv) -> Result<Self> {
        config.validate()?;
        let track = |strategy: &ExplorationStrategy| {
            matches!(strategy.kind, StrategyKind::ThompsonSampling)
        };
        Ok(Self {
            queue: 0.0,
            reward_model: GpModel::with_tracked_domain(
                env.reward_kernel().clone(),
                config.lambda,
                env.domain(),
                track(&config.reward_strategy),
            )?,
            cost_model: GpModel::with_tracked_domain(
                env.cost_kernel().clone(),
                config.lambda,
                env.domain(),
                track(&config.cost_strategy),
            )?,
            round: 0,
        })
    }
}

/// One round of the queue-driven loop. In the returned detail, the record's
/// `dual` field carries `Q(t)` and `dual_after` carries `Q(t+1)`.
pub fn lyap_step_detailed(
    state: &mut LyapState,
    config: &LyapConfig,
    env: &BanditEnv,
    rngs: &mut RunRngs,
) -> Result<StepDetail> {
    let domain = env.domain();
    let reward_estimate = truncate(
        &config
            .reward_strategy
            .generate_estimate(&state.reward_model, domain, &mut rngs.reward)?,
        config.reward_bound,
    );
    let cost_estimate = truncate(
        &config
            .cost_strategy
            .generate_estimate(&state.cost_model, domain, &mut rngs.cost)?,
        config.cost_bound,
    );
    let action = lyap_select_action(&reward_estimate, &cost_estimate, state.queue, config.v)?;
    let (reward, cost) = env.sample_feedback(action, &mut rngs.noise)?;
    let queue_before = state.queue;
    let queue_after = queue_update(queue_before, cost_estimate[action], config.slack);

    state.reward_model.observe(domain.point(action), reward)?;
    state.cost_model.observe(domain.point(action), cost)?;
    state.queue = queue_after;
    state.round += 1;

    Ok(StepDetail {
        record: RunRecord {
            round: state.round,
            action,
            reward,
            cost,
            true_reward: env.rewards()[action],
            true_cost: env.costs()[action],
            dual: queue_before,
        },
        reward_estimate,
        cost_estimate,
        dual_after: queue_after,
    })
}

/// One round, returning just the trace record.
pub fn lyap_step(
    state: &mut LyapState,
    config: &LyapConfig,
    env: &BanditEnv,
    rngs: &mut RunRngs,
) -> Result<RunRecord> {
    lyap_step_detailed(state, config, env, rngs).map(|d| d.record)
}

/// Full run for `config.horizon` rounds.
pub fn lyap_run(config: &LyapConfig, env: &BanditEnv, seed: u64) -> Result<Vec<RunRecord>> {
    lyap_run_with_observer(config, env, seed, |_| {})
}

/// Full run invoking `observer` with every round's detail.
pub fn lyap_run_with_observer(
    config: &LyapConfig,
    env: &BanditEnv,
    seed: u64,
    mut observer: impl FnMut(&StepDetail),
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    if config.slack > 0.0 {
        let delta = env.slater_margin()?;
        if config.slack > delta / 2.0 + SLACK_TOL {
            return Err(Error::InvalidInput(format!(
                "slack {} exceeds half the Slater margin {delta}",
                config.slack
            )));
        }
    }
    let mut state = LyapState::new(config, env)?;
    let mut rngs = RunRngs::from_seed(seed);
    let mut records = Vec::with_capacity(config.horizon);
    for _ in 0..config.horizon {
        let detail = lyap_step_detailed(&mut state, config, env, &mut rngs)?;
        observer(&detail);
        records.push(detail.record);
    }
    Ok(records)
}
