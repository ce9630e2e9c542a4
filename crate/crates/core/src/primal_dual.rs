//! Primal-dual constrained bandit loop.
//!
//! Each round the loop builds optimistic estimate vectors for the reward and
//! the cost, truncates them to the known range bounds, and plays the point
//! maximizing the scalarization `f_est(x) - phi * g_est(x)`, where `phi >= 0`
//! is a dual multiplier on the average-cost constraint. After observing
//! feedback, the multiplier takes one projected ascent step driven by the
//! *truncated cost estimate at the played point* (not the noisy observation):
//!
//! ```text
//! phi <- clamp(phi + (g_est(x_t) + slack) / V, 0, rho)
//! ```
//!
//! `rho` caps the multiplier, `1/V` is the step size, and `slack >= 0`
//! tightens the constraint so that sublinear violation can be traded for
//! exactly zero violation. The defaults tie both knobs to the instance:
//! `rho = 4 B / delta` (four range bounds per unit of Slater margin) and
//! `V = G sqrt(T) / rho`, so the step size shrinks like `1/sqrt(T)`.
//!
//! Ties in the scalarization go to the lowest index, every estimate is
//! truncated before use, and all randomness flows through three fixed,
//! independently seeded streams (feedback noise, reward exploration, cost
//! exploration) so that a `(config, seed)` pair fully determines a run.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::env::BanditEnv;
use crate::error::{Error, Result};
use crate::explore::{truncate, ExplorationStrategy, StrategyKind};
use crate::gp::GpModel;
use crate::record::RunRecord;

/// Slack validation allows this much numerical headroom over `delta / 2`.
const SLACK_TOL: f64 = 1e-12;

/// Parameters of one primal-dual run.
#[derive(Debug, Clone)]
pub struct CkbConfig {
    pub horizon: usize,
    /// Dual-multiplier cap `rho > 0`.
    pub rho: f64,
    /// Dual step scale `V > 0`; the ascent step is `1/V`.
    pub v: f64,
    /// Constraint tightening `slack >= 0`. Validated against the
    /// environment's Slater margin (`slack <= delta / 2`) when positive.
    pub slack: f64,
    /// Range bound used to truncate reward estimates.
    pub reward_bound: f64,
    /// Range bound used to truncate cost estimates.
    pub cost_bound: f64,
    /// Noise ridge for both GP models.
    pub lambda: f64,
    pub reward_strategy: ExplorationStrategy,
    pub cost_strategy: ExplorationStrategy,
}

impl CkbConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v, strict) in [
            ("rho", self.rho, true),
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

/// Instance-tied defaults `(rho, V) = (4 B / delta, G sqrt(T) / rho)`.
pub fn default_params(
    reward_bound: f64,
    cost_bound: f64,
    slater: f64,
    horizon: usize,
) -> Result<(f64, f64)> {
    if !(slater > 0.0 && slater.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "Slater margin must be positive and finite, got {slater}"
        )));
    }
    if !(reward_bound > 0.0) || !(cost_bound > 0.0) {
        return Err(Error::InvalidInput(
            "range bounds must be positive for default parameters".into(),
        ));
    }
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let rho = 4.0 * reward_bound / slater;
    let v = cost_bound * (horizon as f64).sqrt() / rho;
    Ok((rho, v))
}

/// Argmax of `reward_est - dual * cost_est`, lowest index on ties.
pub fn select_action(reward_est: &[f64], cost_est: &[f64], dual: f64) -> Result<usize> {
    if reward_est.is_empty() {
        return Err(Error::InvalidInput("estimate vectors must be non-empty".into()));
    }
    if reward_est.len() != cost_est.len() {
        return Err(Error::DimensionMismatch {
            expected: reward_est.len(),
            got: cost_est.len(),
        });
    }
    if !(dual >= 0.0 && dual.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "dual multiplier must be non-negative and finite, got {dual}"
        )));
    }
    let mut best = 0;
    let mut best_val = reward_est[0] - dual * cost_est[0];
    for i in 1..reward_est.len() {
        let v = reward_est[i] - dual * cost_est[i];
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    Ok(best)
}

/// One projected ascent step of the dual multiplier.
pub fn dual_update(dual: f64, cost_est_at_action: f64, config: &CkbConfig) -> f64 {
    (dual + (cost_est_at_action + config.slack) / config.v).clamp(0.0, config.rho)
}

/// The three independent random streams a run consumes. Stream assignment is
/// fixed (0: feedback noise, 1: reward exploration, 2: cost exploration) so
/// that changing one strategy never perturbs the draws of another.
#[derive(Debug, Clone)]
pub struct RunRngs {
    pub noise: ChaCha12Rng,
    pub reward: ChaCha12Rng,
    pub cost: ChaCha12Rng,
}

impl RunRngs {
    pub fn from_seed(seed: u64) -> Self {
        Self::for_episode(seed, 0)
    }

    /// Stream block for episode `k` of a restarting wrapper; episodes must
    /// not share randomness.
    pub fn for_episode(seed: u64, episode: u64) -> Self {
        let mk = |stream: u64| {
            let mut r = ChaCha12Rng::seed_from_u64(seed);
            r.set_stream(3 * episode + stream);
            r
        };
        Self {
            noise: mk(0),
            reward: mk(1),
            cost: mk(2),
        }
    }
}

/// Mutable state of a primal-dual run.
#[derive(Debug, Clone)]
pub struct CkbState {
    pub dual: f64,
    pub reward_model: GpModel,
    pub cost_model: GpModel,
    /// Rounds completed so far.
    pub round: usize,
}

impl CkbState {
    /// Fresh state: zero multiplier, empty models tracking the environment's
    /// domain. Posterior covariance over the domain is maintained only for
    /// models driven by Thompson sampling, which is the one strategy that
    /// needs joint draws.
    pub fn new(config: &CkbConfig, env: &BanditEnv) -> Result<Self> {
        config.validate()?;
        let track = |strategy: &ExplorationStrategy| {
            matches!(strategy.kind, StrategyKind::ThompsonSampling)
        };
        Ok(Self {
            dual: 0.0,
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

/// Everything one round produced, for observers that need more than the
/// trace record: the full truncated estimate vectors and the post-update
/// multiplier.
#[derive(Debug, Clone)]
pub struct StepDetail {
    pub record: RunRecord,
    /// Truncated reward estimates over the whole domain.
    pub reward_estimate: Vec<f64>,
    /// Truncated cost estimates over the whole domain.
    pub cost_estimate: Vec<f64>,
    /// Multiplier after this round's ascent step.
    pub dual_after: f64,
}

/// Runs one round: estimate, truncate, select, observe, ascend.
pub fn step(
    state: &mut CkbState,
    config: &CkbConfig,
    env: &BanditEnv,
    rngs: &mut RunRngs,
) -> Result<RunRecord> {
    step_detailed(state, config, env, rngs).map(|d| d.record)
}

/// [`step`] with the per-round internals exposed.
pub fn step_detailed(
    state: &mut CkbState,
    config: &CkbConfig,
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
    let action = select_action(&reward_estimate, &cost_estimate, state.dual)?;
    let (reward, cost) = env.sample_feedback(action, &mut rngs.noise)?;
    let dual_before = state.dual;
    let dual_after = dual_update(dual_before, cost_estimate[action], config);

    state.reward_model.observe(domain.point(action), reward)?;
    state.cost_model.observe(domain.point(action), cost)?;
    state.dual = dual_after;
    state.round += 1;

    Ok(StepDetail {
        record: RunRecord {
            round: state.round,
            action,
            reward,
            cost,
            true_reward: env.rewards()[action],
            true_cost: env.costs()[action],
            dual: dual_before,
        },
        reward_estimate,
        cost_estimate,
        dual_after,
    })
}

/// Full run for `config.horizon` rounds. See [`run_with_observer`].
pub fn run(config: &CkbConfig, env: &BanditEnv, seed: u64) -> Result<Vec<RunRecord>> {
    run_with_observer(config, env, seed, |_| {})
}

/// Full run, invoking `observer` with each round's [`StepDetail`]. Positive
/// slack is validated against the environment's Slater margin
/// (`slack <= delta / 2`) before the first round.
pub fn run_with_observer(
    config: &CkbConfig,
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
    let mut state = CkbState::new(config, env)?;
    let mut rngs = RunRngs::from_seed(seed);
    let mut records = Vec::with_capacity(config.horizon);
    for _ in 0..config.horizon {
        let detail = step_detailed(&mut state, config, env, &mut rngs)?;
        observer(&detail);
        records.push(detail.record);
    }
    Ok(records)
}

/// Horizon-doubling wrapper for unknown total length: runs episodes of
/// `config.horizon`, `2 * config.horizon`, ... until `total_rounds` rounds
/// have been played, restarting from scratch each episode (fresh GP models,
/// multiplier back to zero, fresh random streams). The step scale `V` is
/// rescaled by `sqrt(2)` per episode to stay tuned to the episode length;
/// `rho` and `slack` are horizon-free and stay fixed. Records are
/// renumbered globally.
pub fn run_doubling(
    config: &CkbConfig,
    env: &BanditEnv,
    seed: u64,
    total_rounds: usize,
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    if config.horizon == 0 {
        return Err(Error::InvalidInput(
            "doubling wrapper needs a positive initial horizon".into(),
        ));
    }
    let mut records = Vec::with_capacity(total_rounds);
    let mut episode = 0u64;
    while records.len() < total_rounds {
        let len = config.horizon << episode;
        let episode_config = CkbConfig {
            horizon: len.min(total_rounds - records.len()),
            v: config.v * 2f64.powf(episode as f64 / 2.0),
            ..config.clone()
        };
        let mut state = CkbState::new(&episode_config, env)?;
        let mut rngs = RunRngs::for_episode(seed, episode);
        for _ in 0..episode_config.horizon {
            let mut record = step(&mut state, &episode_config, env, &mut rngs)?;
            record.round = records.len() + 1;
            records.push(record);
        }
        episode += 1;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_synthetic, NoiseSpec, SyntheticOpts};
    use crate::explore::{BetaSchedule, Sign, StrategyKind};
    use crate::kernel::{Domain, KernelSpec};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn se(l: f64) -> KernelSpec {
        KernelSpec::squared_exponential(l, 1).unwrap()
    }

    fn ucb(sign: Sign, norm_bound: f64, noise_scale: f64) -> ExplorationStrategy {
        ExplorationStrategy::new(
            StrategyKind::Ucb { sign },
            BetaSchedule::new(norm_bound, noise_scale, 0.1).unwrap(),
        )
        .unwrap()
    }

    fn test_config(horizon: usize, b: f64, g: f64) -> CkbConfig {
        let (rho, v) = default_params(b, g, 1.0, horizon.max(1)).unwrap();
        CkbConfig {
            horizon,
            rho,
            v,
            slack: 0.0,
            reward_bound: b,
            cost_bound: g,
            lambda: 1.0 + 2.0 / horizon.max(1) as f64,
            reward_strategy: ucb(Sign::Plus, b, 0.1),
            cost_strategy: ucb(Sign::Minus, g, 0.1),
        }
    }

    fn noise_free_env(rewards: Vec<f64>, costs: Vec<f64>) -> BanditEnv {
        let domain = Domain::grid_1d(rewards.len()).unwrap();
        BanditEnv::from_functions(
            domain,
            rewards,
            costs,
            se(0.25),
            se(0.25),
            NoiseSpec::Gaussian { std: 0.0 },
            NoiseSpec::Gaussian { std: 0.0 },
        )
        .unwrap()
    }

    #[test]
    fn default_params_follow_the_instance() {
        let (rho, v) = default_params(1.0, 1.0, 1.0, 100).unwrap();
        assert_eq!(rho, 4.0);
        assert_eq!(v, 2.5);
        let (rho, _) = default_params(2.0, 1.0, 0.5, 100).unwrap();
        assert_eq!(rho, 16.0);
        assert!(default_params(1.0, 1.0, 0.0, 100).is_err());
        assert!(default_params(1.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn select_action_penalizes_costly_arms() {
        // Equal rewards: the multiplier must steer to the cheaper arm.
        assert_eq!(select_action(&[1.0, 1.0], &[1.0, -1.0], 1.0).unwrap(), 1);
        // Zero multiplier ignores costs entirely.
        assert_eq!(select_action(&[1.0, 2.0], &[-5.0, 5.0], 0.0).unwrap(), 1);
    }

    #[test]
    fn select_action_breaks_ties_at_lowest_index() {
        assert_eq!(select_action(&[0.5, 0.5, 0.5], &[0.1, 0.1, 0.1], 2.0).unwrap(), 0);
    }

    #[test]
    fn select_action_validates_inputs() {
        assert!(select_action(&[], &[], 0.0).is_err());
        assert!(select_action(&[1.0], &[1.0, 2.0], 0.0).is_err());
        assert!(select_action(&[1.0], &[1.0], -0.5).is_err());
    }

    #[test]
    fn dual_update_moves_and_clamps() {
        let mut cfg = test_config(100, 1.0, 1.0);
        cfg.rho = 4.0;
        cfg.v = 10.0;
        cfg.slack = 0.0;
        assert_abs_diff_eq!(dual_update(0.5, 0.2, &cfg), 0.52, epsilon = 1e-15);
        // Ascent is capped at rho...
        cfg.v = 0.1;
        assert_eq!(dual_update(3.9, 1.0, &cfg), 4.0);
        // ...and projected at zero from below.
        assert_eq!(dual_update(0.05, -1.0, &cfg), 0.0);
    }

    proptest! {
        /// Adding a constant to every reward estimate cannot change the
        /// argmax. Dyadic inputs keep all arithmetic exact, so the check is
        /// for bit-for-bit equality of the chosen index.
        #[test]
        fn select_action_is_shift_invariant(
            f in proptest::collection::vec(-16i32..16, 1..12),
            g_seed in proptest::collection::vec(-16i32..16, 1..12),
            dual_num in 0i32..16,
            shift in -32i32..32,
        ) {
            let n = f.len().min(g_seed.len());
            let f: Vec<f64> = f[..n].iter().map(|&k| k as f64 / 8.0).collect();
            let g: Vec<f64> = g_seed[..n].iter().map(|&k| k as f64 / 8.0).collect();
            let dual = dual_num as f64 / 4.0;
            let c = shift as f64 / 8.0;
            let shifted: Vec<f64> = f.iter().map(|v| v + c).collect();
            prop_assert_eq!(
                select_action(&f, &g, dual).unwrap(),
                select_action(&shifted, &g, dual).unwrap()
            );
        }

        /// The multiplier stays in [0, rho] for arbitrary bounded inputs.
        #[test]
        fn dual_update_stays_in_range(
            dual in 0.0f64..4.0,
            cost in -1.0f64..1.0,
            slack in 0.0f64..0.5,
            v in 0.1f64..10.0,
        ) {
            let mut cfg = test_config(10, 1.0, 1.0);
            cfg.rho = 4.0;
            cfg.v = v;
            cfg.slack = slack;
            let next = dual_update(dual, cost, &cfg);
            prop_assert!((0.0..=4.0).contains(&next));
        }
    }

    /// Dense re-implementation of the first rounds: closed-form posterior via
    /// matrix inverse, explicit UCB/LCB, explicit argmax and ascent. Serves
    /// as an independent check that `step` wires the pieces in the right
    /// order (estimates before selection, update from the truncated cost
    /// estimate at the played point, models updated after).
    fn reference_rounds(
        env: &BanditEnv,
        cfg: &CkbConfig,
        rngs: &mut RunRngs,
        rounds: usize,
    ) -> Vec<(usize, f64)> {
        let n = env.domain().len();
        let mut obs: Vec<(usize, f64, f64)> = Vec::new(); // (arm, r, c)
        let mut dual = 0.0;
        let mut out = Vec::new();
        for _ in 0..rounds {
            let posterior = |which: usize, gain: &mut f64| -> (Vec<f64>, Vec<f64>) {
                let kernel = if which == 0 {
                    env.reward_kernel()
                } else {
                    env.cost_kernel()
                };
                let t = obs.len();
                let mut mean = vec![0.0; n];
                let mut std = vec![1.0; n];
                if t > 0 {
                    let mut k = DMatrix::zeros(t, t);
                    for i in 0..t {
                        for j in 0..t {
                            k[(i, j)] = kernel
                                .evaluate(
                                    env.domain().point(obs[i].0),
                                    env.domain().point(obs[j].0),
                                )
                                .unwrap();
                        }
                        k[(i, i)] += cfg.lambda;
                    }
                    let inv = k.clone().try_inverse().unwrap();
                    let y = DMatrix::from_fn(t, 1, |i, _| {
                        if which == 0 {
                            obs[i].1
                        } else {
                            obs[i].2
                        }
                    });
                    for x in 0..n {
                        let kx = DMatrix::from_fn(t, 1, |i, _| {
                            kernel
                                .evaluate(env.domain().point(obs[i].0), env.domain().point(x))
                                .unwrap()
                        });
                        mean[x] = (kx.transpose() * &inv * &y)[(0, 0)];
                        std[x] = (1.0 - (kx.transpose() * &inv * &kx)[(0, 0)]).max(0.0).sqrt();
                    }
                    // Batch information gain 0.5 ln det(I + K/lambda).
                    let mut ik = DMatrix::<f64>::identity(t, t);
                    for i in 0..t {
                        for j in 0..t {
                            ik[(i, j)] += (k[(i, j)]
                                - if i == j { cfg.lambda } else { 0.0 })
                                / cfg.lambda;
                        }
                    }
                    *gain = 0.5 * ik.determinant().ln();
                }
                (mean, std)
            };
            let mut gain_f = 0.0;
            let mut gain_g = 0.0;
            let (mf, sf) = posterior(0, &mut gain_f);
            let (mg, sg) = posterior(1, &mut gain_g);
            let bf = cfg.reward_strategy.beta.beta(gain_f);
            let bg = cfg.cost_strategy.beta.beta(gain_g);
            let fbar: Vec<f64> = (0..n)
                .map(|x| (mf[x] + bf * sf[x]).clamp(-cfg.reward_bound, cfg.reward_bound))
                .collect();
            let gbar: Vec<f64> = (0..n)
                .map(|x| (mg[x] - bg * sg[x]).clamp(-cfg.cost_bound, cfg.cost_bound))
                .collect();
            let mut best = 0;
            for x in 1..n {
                if fbar[x] - dual * gbar[x] > fbar[best] - dual * gbar[best] {
                    best = x;
                }
            }
            let (r, c) = env.sample_feedback(best, &mut rngs.noise).unwrap();
            out.push((best, dual));
            dual = (dual + (gbar[best] + cfg.slack) / cfg.v).clamp(0.0, cfg.rho);
            obs.push((best, r, c));
        }
        out
    }

    #[test]
    fn step_matches_dense_reference_for_three_rounds() {
        let env = noise_free_env(vec![0.3, 0.9], vec![0.4, -0.2]);
        let cfg = test_config(3, 0.9, 0.4);
        let reference = reference_rounds(&env, &cfg, &mut RunRngs::from_seed(5), 3);

        let mut state = CkbState::new(&cfg, &env).unwrap();
        let mut rngs = RunRngs::from_seed(5);
        for (round, &(want_action, want_dual)) in reference.iter().enumerate() {
            let rec = step(&mut state, &cfg, &env, &mut rngs).unwrap();
            assert_eq!(rec.round, round + 1);
            assert_eq!(rec.action, want_action, "round {round}");
            assert_abs_diff_eq!(rec.dual, want_dual, epsilon = 1e-9);
        }
    }

    #[test]
    fn first_round_ties_resolve_to_index_zero() {
        // Fresh models: every UCB estimate is identical, so round 1 must
        // play the first point.
        let env = noise_free_env(vec![0.1, 0.5, 0.9], vec![-0.3, -0.3, 0.2]);
        let cfg = test_config(1, 0.9, 0.3);
        let recs = run(&cfg, &env, 11).unwrap();
        assert_eq!(recs[0].action, 0);
        assert_eq!(recs[0].dual, 0.0);
    }

    #[test]
    fn runs_are_deterministic_per_seed() {
        let opts = SyntheticOpts {
            reward_kernel: se(0.2),
            cost_kernel: se(0.2),
            domain_size: 30,
            support_size: 30,
            reward_noise: NoiseSpec::Gaussian { std: 0.1 },
            cost_noise: NoiseSpec::Gaussian { std: 0.1 },
        };
        let env = generate_synthetic(&opts, 9).unwrap();
        let mut cfg = test_config(40, env.reward_bound(), env.cost_bound());
        cfg.reward_strategy = ExplorationStrategy::new(
            StrategyKind::ThompsonSampling,
            BetaSchedule::new(env.reward_bound(), 0.1, 0.1).unwrap(),
        )
        .unwrap();
        let a = run(&cfg, &env, 123).unwrap();
        let b = run(&cfg, &env, 123).unwrap();
        assert_eq!(a, b);
        let c = run(&cfg, &env, 124).unwrap();
        assert!(a.iter().zip(&c).any(|(x, y)| x != y), "different seeds should diverge");
    }

    #[test]
    fn zero_horizon_runs_to_empty_trace() {
        let env = noise_free_env(vec![0.5, -0.5], vec![-0.1, 0.1]);
        let cfg = test_config(0, 0.5, 0.1);
        assert!(run(&cfg, &env, 0).unwrap().is_empty());
    }

    #[test]
    fn multiplier_stays_projected_all_run() {
        let env = noise_free_env(vec![0.2, 0.8, -0.4], vec![0.5, 0.5, -0.6]);
        let mut cfg = test_config(200, 0.8, 0.6);
        cfg.rho = 0.75; // tight cap to make the projection bind
        cfg.v = 0.2;
        let mut seen_cap = false;
        run_with_observer(&cfg, &env, 3, |d| {
            assert!((0.0..=cfg.rho).contains(&d.record.dual));
            assert!((0.0..=cfg.rho).contains(&d.dual_after));
            seen_cap |= d.dual_after == cfg.rho;
        })
        .unwrap();
        assert!(seen_cap, "cap never engaged; projection untested");
    }

    #[test]
    fn never_binding_constraint_reduces_to_pure_reward_ucb() {
        // Cost is uniformly -0.5: the multiplier never leaves zero and the
        // action sequence must match a plain reward-UCB loop consuming the
        // same streams.
        let rewards = vec![0.15, 0.6, -0.3, 0.45, 0.05];
        let costs = vec![-0.5; 5];
        let env = noise_free_env(rewards, costs);
        let cfg = test_config(60, 0.6, 0.5);
        let records = run(&cfg, &env, 21).unwrap();
        assert!(records.iter().all(|r| r.dual == 0.0));
        assert!(records.iter().all(|r| r.true_cost < 0.0));

        let mut model = GpModel::with_tracked_domain(
            env.reward_kernel().clone(),
            cfg.lambda,
            env.domain(),
            false,
        )
        .unwrap();
        let mut rngs = RunRngs::from_seed(21);
        for rec in &records {
            let est = truncate(
                &cfg.reward_strategy
                    .generate_estimate(&model, env.domain(), &mut rngs.reward)
                    .unwrap(),
                cfg.reward_bound,
            );
            let mut best = 0;
            for i in 1..est.len() {
                if est[i] > est[best] {
                    best = i;
                }
            }
            assert_eq!(rec.action, best, "round {}", rec.round);
            let (r, _) = env.sample_feedback(best, &mut rngs.noise).unwrap();
            model.observe(env.domain().point(best), r).unwrap();
        }
    }

    #[test]
    fn ascent_steps_satisfy_the_telescoped_bound() {
        // For any comparator phi in [0, rho], projected ascent guarantees
        //   sum_t y_t (phi - phi_t) <= V/2 phi^2 + sum_t y_t^2 / (2V)
        // with y_t the increment actually applied. Checked against both
        // endpoints of the multiplier range on a short noisy run.
        let opts = SyntheticOpts {
            reward_kernel: se(0.2),
            cost_kernel: se(0.2),
            domain_size: 25,
            support_size: 25,
            reward_noise: NoiseSpec::Gaussian { std: 0.1 },
            cost_noise: NoiseSpec::Gaussian { std: 0.1 },
        };
        let env = generate_synthetic(&opts, 14).unwrap();
        let (rho, v) = default_params(env.reward_bound(), env.cost_bound(), env.slater_margin().unwrap(), 50).unwrap();
        let mut cfg = test_config(50, env.reward_bound(), env.cost_bound());
        cfg.rho = rho;
        cfg.v = v;
        let mut ys = Vec::new();
        let mut duals = Vec::new();
        run_with_observer(&cfg, &env, 2, |d| {
            ys.push(d.cost_estimate[d.record.action] + cfg.slack);
            duals.push(d.record.dual);
        })
        .unwrap();
        for phi in [0.0, rho] {
            let lhs: f64 = ys.iter().zip(&duals).map(|(y, p)| y * (phi - p)).sum();
            let rhs: f64 =
                v / 2.0 * phi * phi + ys.iter().map(|y| y * y).sum::<f64>() / (2.0 * v);
            assert!(lhs <= rhs + 1e-6, "phi={phi}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn doubling_wrapper_restarts_and_covers_total() {
        let env = noise_free_env(vec![0.2, 0.7, -0.1], vec![0.3, -0.4, -0.2]);
        let mut cfg = test_config(10, 0.7, 0.4);
        cfg.v = 1.0;
        let records = run_doubling(&cfg, &env, 6, 75).unwrap();
        assert_eq!(records.len(), 75);
        assert!(records.iter().enumerate().all(|(i, r)| r.round == i + 1));
        // Episode boundaries at 10 and 30 reset the multiplier to zero.
        assert_eq!(records[10].dual, 0.0);
        assert_eq!(records[30].dual, 0.0);
        // Deterministic end to end.
        assert_eq!(records, run_doubling(&cfg, &env, 6, 75).unwrap());
    }

    #[test]
    fn excessive_slack_is_rejected_against_the_margin() {
        let env = noise_free_env(vec![0.5, 0.2], vec![-0.4, 0.3]); // delta = 0.4
        let mut cfg = test_config(5, 0.5, 0.4);
        cfg.slack = 0.3; // > delta / 2
        assert!(matches!(run(&cfg, &env, 0), Err(Error::InvalidInput(_))));
        cfg.slack = 0.2; // == delta / 2 is allowed
        assert!(run(&cfg, &env, 0).is_ok());
    }
}
