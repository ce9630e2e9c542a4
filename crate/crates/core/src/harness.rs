//! Experiment runner: resolves a parsed config against an environment,
//! runs independent trials in parallel, aggregates metric curves, and
//! writes plot-ready CSV artifacts.
//!
//! Resolution fills every parameter the file left out with its
//! instance-tied default:
//!
//! * range bounds `B`, `G` from the environment, noise bound `R` from its
//!   noise scales,
//! * `rho = 4 B / delta` and `v = G sqrt(T) / rho` where `delta` is the
//!   Slater margin,
//! * ridge `lambda = 1 + 2 / T`, confidence level `alpha = 0.1`,
//! * `slack = min(delta / 2, 2 G / sqrt(T))` in zero-violation mode.
//!
//! The environment is built once from the base seed; trial `i` then runs
//! with seed `base_seed + i`. Synthetic generation draws from a dedicated
//! RNG stream, so a trial whose seed equals the base seed shares no
//! randomness with the environment. Trials are independent and run via a
//! parallel iterator; results are collected in trial order, making every
//! output byte-deterministic regardless of scheduling.
//!
//! Output files (under [`emit_csv`]'s directory):
//!
//! * `metrics.csv` — strictly a header plus one row per round; columns are
//!   the trial means and standard errors of each metric curve,
//! * `trace_NNNN.csv` — optional per-trial round traces,
//! * `summary.txt` — resolved parameters, benchmark value, and warnings.
//!
//! Error bars are standard errors of the mean across trials (sample
//! standard deviation over the square root of the trial count); the summary
//! file restates this so the CSV needs no comment rows.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{Algorithm, ConfigFile, SlackSetting};
use crate::env::{
    generate_synthetic, load_dataset, BanditEnv, DatasetOpts, OracleSolution, SyntheticOpts,
};
use crate::error::{Error, Result};
use crate::explore::{BetaSchedule, ExplorationStrategy, Sign};
use crate::lyapunov::{is_analyzed_strategy, lyap_run, LyapConfig};
use crate::metrics::{aggregate, MetricSeries, TrialMetrics};
use crate::primal_dual::{run, CkbConfig};
use crate::record::RunRecord;

/// A fully resolved experiment: environment plus every numeric parameter.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub env: BanditEnv,
    /// Best-mixture benchmark at zero tightening; regret is measured
    /// against its value even when the run itself uses a positive slack.
    pub oracle: OracleSolution,
    pub slater: f64,
    pub reward_bound: f64,
    pub cost_bound: f64,
    pub noise_bound: f64,
    pub alpha: f64,
    pub rho: f64,
    pub v: f64,
    pub slack: f64,
    pub lambda: f64,
    pub reward_strategy: ExplorationStrategy,
    pub cost_strategy: ExplorationStrategy,
    /// Advisory notes (heavy-tailed noise, unanalyzed strategy choices).
    pub warnings: Vec<String>,
    pub write_traces: bool,
    pub out_dir: Option<PathBuf>,
}

/// Aggregated curves plus the raw per-trial traces, in trial order.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub series: MetricSeries,
    pub traces: Vec<Vec<RunRecord>>,
}

/// Builds the environment and fills every defaulted parameter.
pub fn resolve(config: &ConfigFile) -> Result<ResolvedExperiment> {
    config.validate()?;
    let horizon = config.experiment.horizon;
    let base_seed = config.experiment.seed;

    let env = match config.env.kind.as_str() {
        "synthetic" => {
            let noise = config.synthetic_noise()?;
            let opts = SyntheticOpts {
                reward_kernel: config.reward_kernel()?,
                cost_kernel: config.cost_kernel()?,
                domain_size: config.env.domain_size,
                support_size: config.env.support_size.unwrap_or(config.env.domain_size),
                reward_noise: noise,
                cost_noise: noise,
            };
            generate_synthetic(&opts, base_seed)?
        }
        "dataset" => {
            let path = config.env.path.as_deref().expect("validated");
            load_dataset(
                Path::new(path),
                &DatasetOpts {
                    columns: config.env.columns.clone(),
                    threshold: config.env.threshold.map(|t| t.rule()),
                },
            )?
        }
        _ => unreachable!("validated"),
    };

    let slater = env.slater_margin()?;
    let oracle = env.oracle_optimum(0.0)?;
    let reward_bound = config.overrides.reward_bound.unwrap_or(env.reward_bound());
    let cost_bound = config.overrides.cost_bound.unwrap_or(env.cost_bound());
    let (reward_scale, cost_scale) = env.noise_scales();
    let noise_bound = config
        .overrides
        .noise_bound
        .unwrap_or(reward_scale.max(cost_scale));
    let alpha = config.overrides.alpha.unwrap_or(0.1);
    let lambda = config
        .overrides
        .lambda
        .unwrap_or(1.0 + 2.0 / horizon as f64);
    let rho = config
        .overrides
        .rho
        .unwrap_or(4.0 * reward_bound / slater);
    let v = config
        .overrides
        .v
        .unwrap_or(cost_bound * (horizon as f64).sqrt() / rho);
    let slack = match config.slack() {
        SlackSetting::Off => 0.0,
        SlackSetting::Fixed(value) => value,
        SlackSetting::ZeroViolation => {
            (slater / 2.0).min(2.0 * cost_bound / (horizon as f64).sqrt())
        }
    };

    let reward_strategy = ExplorationStrategy::new(
        config.reward_selector()?.kind_for(Sign::Plus),
        BetaSchedule::new(reward_bound, noise_bound, alpha)?,
    )?;
    let cost_strategy = ExplorationStrategy::new(
        config.cost_selector()?.kind_for(Sign::Minus),
        BetaSchedule::new(cost_bound, noise_bound, alpha)?,
    )?;

    let algorithm = config.algorithm()?;
    let mut warnings = Vec::new();
    if !env.noise_is_sub_gaussian() {
        warnings.push(
            "observation noise is heavy-tailed (not sub-Gaussian); the confidence-width \
             guarantees do not apply"
                .to_string(),
        );
    }
    if algorithm == Algorithm::Lyapunov {
        for (side, strategy) in [("reward", &reward_strategy), ("cost", &cost_strategy)] {
            if !is_analyzed_strategy(&strategy.kind) {
                warnings.push(format!(
                    "the queue-stability analysis covers deterministic optimistic estimates; \
                     the {side} side uses an unanalyzed strategy"
                ));
            }
        }
    }

    Ok(ResolvedExperiment {
        algorithm,
        horizon,
        trials: config.experiment.trials,
        base_seed,
        env,
        oracle,
        slater,
        reward_bound,
        cost_bound,
        noise_bound,
        alpha,
        rho,
        v,
        slack,
        lambda,
        reward_strategy,
        cost_strategy,
        warnings,
        write_traces: config.output.traces,
        out_dir: config.output.dir.as_ref().map(PathBuf::from),
    })
}

impl ResolvedExperiment {
    fn ckb_config(&self) -> CkbConfig {
        CkbConfig {
            horizon: self.horizon,
            rho: self.rho,
            v: self.v,
            slack: self.slack,
            reward_bound: self.reward_bound,
            cost_bound: self.cost_bound,
            lambda: self.lambda,
            reward_strategy: self.reward_strategy,
            cost_strategy: self.cost_strategy,
        }
    }

    fn lyap_config(&self) -> LyapConfig {
        LyapConfig {
            horizon: self.horizon,
            v: self.v,
            slack: self.slack,
            reward_bound: self.reward_bound,
            cost_bound: self.cost_bound,
            lambda: self.lambda,
            reward_strategy: self.reward_strategy,
            cost_strategy: self.cost_strategy,
        }
    }

    /// Runs all trials and aggregates their metric curves.
    pub fn run(&self) -> Result<ExperimentResult> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        let traces: Vec<Vec<RunRecord>> = (0..self.trials)
            .into_par_iter()
            .map(|i| {
                let seed = self.base_seed.wrapping_add(i as u64);
                let records = match self.algorithm {
                    Algorithm::PrimalDual => run(&self.ckb_config(), &self.env, seed),
                    Algorithm::Lyapunov => lyap_run(&self.lyap_config(), &self.env, seed),
                };
                // Annotate with the trial index, but keep degeneracies
                // intact: they map to their own process exit code.
                records.map_err(|e| match e {
                    Error::Degeneracy { .. } => e,
                    other => Error::InvalidInput(format!("trial {i} failed: {other}")),
                })
            })
            .collect::<Result<_>>()?;
        let metrics: Vec<TrialMetrics> = traces
            .iter()
            .map(|t| TrialMetrics::from_records(t, self.oracle.value))
            .collect();
        Ok(ExperimentResult {
            series: aggregate(&metrics)?,
            traces,
        })
    }

    /// Human-readable record of every resolved parameter.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let algorithm = match self.algorithm {
            Algorithm::PrimalDual => "ckb (projected dual ascent)",
            Algorithm::Lyapunov => "lyapunov (virtual queue)",
        };
        let _ = writeln!(s, "algorithm: {algorithm}");
        let _ = writeln!(s, "horizon: {}", self.horizon);
        let _ = writeln!(s, "trials: {} (seeds {}..)", self.trials, self.base_seed);
        let _ = writeln!(s, "domain size: {}", self.env.domain().len());
        let _ = writeln!(s, "environment: {:?}", self.env.kind());
        let _ = writeln!(s, "benchmark value: {}", self.oracle.value);
        let _ = writeln!(s, "benchmark support: {:?}", self.oracle.support);
        let _ = writeln!(s, "slater margin: {}", self.slater);
        let _ = writeln!(s, "reward bound B: {}", self.reward_bound);
        let _ = writeln!(s, "cost bound G: {}", self.cost_bound);
        let _ = writeln!(s, "noise bound R: {}", self.noise_bound);
        let _ = writeln!(s, "alpha: {}", self.alpha);
        let _ = writeln!(s, "rho: {}", self.rho);
        let _ = writeln!(s, "v: {}", self.v);
        let _ = writeln!(s, "slack: {}", self.slack);
        let _ = writeln!(s, "lambda: {}", self.lambda);
        let _ = writeln!(s, "reward strategy: {:?}", self.reward_strategy.kind);
        let _ = writeln!(s, "cost strategy: {:?}", self.cost_strategy.kind);
        let _ = writeln!(
            s,
            "error bars: standard error of the mean across trials \
             (sample standard deviation / sqrt(trials))"
        );
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Header of `metrics.csv`.
pub const METRICS_HEADER: &str = "t,regret_plus_mean,regret_plus_se,violation_mean,violation_se,\
                                  strong_violation_mean,strong_violation_se,n_violated_mean";

/// Header of each trace file.
pub const TRACE_HEADER: &str = "t,action,r,c,f_true,g_true,dual";

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("cannot write {}: {e}", path.display()))
}

/// Writes `metrics.csv`, optional per-trial traces, and `summary.txt` into
/// `dir` (created if missing). Returns the paths written, `metrics.csv`
/// first. Floats use Rust's shortest round-trip decimal form, so parsing
/// the file back recovers every value exactly.
pub fn emit_csv(
    exp: &ResolvedExperiment,
    result: &ExperimentResult,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();

    let metrics_path = dir.join("metrics.csv");
    {
        let series = &result.series;
        let mut out = String::with_capacity(64 * (series.horizon + 1));
        out.push_str(METRICS_HEADER);
        out.push('\n');
        for t in 0..series.horizon {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                t + 1,
                series.regret_plus.mean[t],
                series.regret_plus.se[t],
                series.violation.mean[t],
                series.violation.se[t],
                series.strong_violation.mean[t],
                series.strong_violation.se[t],
                series.violated_rounds_mean[t],
            );
        }
        std::fs::write(&metrics_path, out).map_err(|e| io_err(&metrics_path, e))?;
    }
    written.push(metrics_path);

    if exp.write_traces {
        for (i, trace) in result.traces.iter().enumerate() {
            let path = dir.join(format!("trace_{i:04}.csv"));
            let file = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
            let mut w = std::io::BufWriter::new(file);
            writeln!(w, "{TRACE_HEADER}").map_err(|e| io_err(&path, e))?;
            for r in trace {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    r.round, r.action, r.reward, r.cost, r.true_reward, r.true_cost, r.dual
                )
                .map_err(|e| io_err(&path, e))?;
            }
            w.flush().map_err(|e| io_err(&path, e))?;
            written.push(path);
        }
    }

    let summary_path = dir.join("summary.txt");
    std::fs::write(&summary_path, exp.summary()).map_err(|e| io_err(&summary_path, e))?;
    written.push(summary_path);

    Ok(written)
}

/// Resolves, runs, and (when an output directory is configured) writes the
/// artifacts. The one-stop entry point behind the CLI.
pub fn run_experiment(config: &ConfigFile) -> Result<(ResolvedExperiment, ExperimentResult)> {
    let exp = resolve(config)?;
    let result = exp.run()?;
    if let Some(dir) = exp.out_dir.clone() {
        emit_csv(&exp, &result, &dir)?;
    }
    Ok((exp, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::NoiseSpec;
    use crate::explore::StrategyKind;
    use crate::gp::GpModel;
    use crate::kernel::{Domain, KernelSpec};
    use crate::metrics::regret_plus;
    use approx::assert_abs_diff_eq;

    fn synthetic_toml(extra: &str) -> String {
        format!(
            r#"
            [experiment]
            horizon = 40
            trials = 3
            seed = 11

            [kernel]
            family = "se"
            lengthscale = 0.2

            [env]
            domain_size = 15
            {extra}
            "#
        )
    }

    fn parse(extra: &str) -> ConfigFile {
        ConfigFile::parse(&synthetic_toml(extra)).unwrap()
    }

    #[test]
    fn resolve_fills_instance_tied_defaults() {
        let exp = resolve(&parse("")).unwrap();
        let b = exp.env.reward_bound();
        let g = exp.env.cost_bound();
        assert_abs_diff_eq!(exp.reward_bound, b);
        assert_abs_diff_eq!(exp.cost_bound, g);
        assert_abs_diff_eq!(exp.noise_bound, 0.1);
        assert_abs_diff_eq!(exp.rho, 4.0 * b / exp.slater, epsilon = 1e-12);
        assert_abs_diff_eq!(
            exp.v,
            g * (exp.horizon as f64).sqrt() / exp.rho,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(exp.lambda, 1.0 + 2.0 / 40.0, epsilon = 1e-15);
        assert_abs_diff_eq!(exp.alpha, 0.1);
        assert_eq!(exp.slack, 0.0);
        assert!(exp.warnings.is_empty());
        assert!(matches!(
            exp.reward_strategy.kind,
            StrategyKind::Ucb { sign: Sign::Plus }
        ));
        assert!(matches!(
            exp.cost_strategy.kind,
            StrategyKind::Ucb { sign: Sign::Minus }
        ));
    }

    #[test]
    fn resolve_respects_overrides() {
        let cfg = ConfigFile::parse(&format!(
            "{}\n[overrides]\nrho = 7.0\nlambda = 1.25\nalpha = 0.05\nnoise_bound = 0.3\n",
            synthetic_toml("")
        ))
        .unwrap();
        let exp = resolve(&cfg).unwrap();
        assert_eq!(exp.rho, 7.0);
        assert_eq!(exp.lambda, 1.25);
        assert_eq!(exp.alpha, 0.05);
        assert_eq!(exp.noise_bound, 0.3);
        // v still derives from the overridden rho.
        assert_abs_diff_eq!(
            exp.v,
            exp.cost_bound * (exp.horizon as f64).sqrt() / 7.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn zero_violation_slack_value() {
        let mut cfg = parse("");
        cfg.exploration.slack = Some(SlackSetting::ZeroViolation);
        let exp = resolve(&cfg).unwrap();
        let expected = (exp.slater / 2.0).min(2.0 * exp.cost_bound / (exp.horizon as f64).sqrt());
        assert_abs_diff_eq!(exp.slack, expected, epsilon = 1e-15);
        assert!(exp.slack > 0.0);
    }

    #[test]
    fn heavy_tailed_noise_and_unanalyzed_lyapunov_warn() {
        let cfg = ConfigFile::parse(
            r#"
            [experiment]
            algorithm = "lyapunov"
            horizon = 10

            [exploration]
            reward = "ts"

            [kernel]
            family = "se"
            lengthscale = 0.2

            [env]
            domain_size = 8
            noise = "student-t"
            noise_scale = 0.05
            noise_dof = 5.0
            "#,
        )
        .unwrap();
        let exp = resolve(&cfg).unwrap();
        assert_eq!(exp.warnings.len(), 2, "{:?}", exp.warnings);
        assert!(exp.warnings[0].contains("heavy-tailed"));
        assert!(exp.warnings[1].contains("unanalyzed"));
    }

    #[test]
    fn run_is_deterministic_and_ignores_output_path() {
        let cfg_a = parse("");
        let mut cfg_b = parse("");
        cfg_b.output.dir = Some("/somewhere/else".into());
        let (exp_a, res_a) = (resolve(&cfg_a).unwrap(), resolve(&cfg_a).unwrap().run().unwrap());
        let res_b = resolve(&cfg_b).unwrap().run().unwrap();
        assert_eq!(res_a.traces, res_b.traces);
        assert_eq!(res_a.series, res_b.series);
        assert_eq!(exp_a.trials, 3);
        assert_eq!(res_a.traces.len(), 3);
        // Different seeds produce different trials.
        assert_ne!(res_a.traces[0], res_a.traces[1]);
    }

    #[test]
    fn single_trial_has_zero_standard_errors() {
        let mut cfg = parse("");
        cfg.experiment.trials = 1;
        let res = resolve(&cfg).unwrap().run().unwrap();
        assert!(res.series.regret_plus.se.iter().all(|&s| s == 0.0));
        assert!(res.series.violation.se.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn final_regret_matches_independent_recomputation() {
        let exp = resolve(&parse("")).unwrap();
        let res = exp.run().unwrap();
        for trace in &res.traces {
            let played: f64 = trace.iter().map(|r| r.true_reward).sum();
            let expected =
                (exp.horizon as f64 * exp.oracle.value - played).max(0.0);
            let series = regret_plus(trace, exp.oracle.value);
            assert_abs_diff_eq!(series[exp.horizon - 1], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn emitted_files_round_trip_exactly() {
        let exp = {
            let mut cfg = parse("");
            cfg.experiment.horizon = 2;
            cfg.experiment.trials = 2;
            resolve(&cfg).unwrap()
        };
        let res = exp.run().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_csv(&exp, &res, dir.path()).unwrap();
        // metrics.csv, two traces, summary.txt
        assert_eq!(files.len(), 4);

        let metrics = std::fs::read_to_string(&files[0]).unwrap();
        let lines: Vec<&str> = metrics.lines().collect();
        assert_eq!(lines.len(), 3); // header + 2 rounds
        assert_eq!(lines[0], METRICS_HEADER);
        for (t, line) in lines[1..].iter().enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 8);
            assert_eq!(fields[0].parse::<usize>().unwrap(), t + 1);
            let s = &res.series;
            for (field, expected) in fields[1..].iter().zip([
                s.regret_plus.mean[t],
                s.regret_plus.se[t],
                s.violation.mean[t],
                s.violation.se[t],
                s.strong_violation.mean[t],
                s.strong_violation.se[t],
                s.violated_rounds_mean[t],
            ]) {
                assert_eq!(field.parse::<f64>().unwrap(), expected);
            }
        }

        // Trace dual column equals the recorded multiplier trace exactly.
        let trace = std::fs::read_to_string(&files[1]).unwrap();
        let lines: Vec<&str> = trace.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        for (line, record) in lines[1..].iter().zip(&res.traces[0]) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[0].parse::<usize>().unwrap(), record.round);
            assert_eq!(fields[1].parse::<usize>().unwrap(), record.action);
            assert_eq!(fields[6].parse::<f64>().unwrap(), record.dual);
        }
    }

    #[test]
    fn trace_emission_can_be_disabled() {
        let exp = {
            let mut cfg = parse("");
            cfg.experiment.horizon = 2;
            cfg.output.traces = false;
            resolve(&cfg).unwrap()
        };
        let res = exp.run().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_csv(&exp, &res, dir.path()).unwrap();
        assert_eq!(files.len(), 2); // metrics.csv + summary.txt
        assert!(files.iter().all(|p| !p.to_string_lossy().contains("trace")));
    }

    #[test]
    fn summary_lists_parameters_and_warnings() {
        let mut cfg = parse("");
        cfg.experiment.algorithm = "lyapunov".into();
        cfg.exploration.reward = "rand-gauss".into();
        let exp = resolve(&cfg).unwrap();
        let text = exp.summary();
        assert!(text.contains("lyapunov"));
        assert!(text.contains("benchmark value"));
        assert!(text.contains("standard error"));
        assert!(text.contains("warning:"));
    }

    /// With a constraint that never binds, the constrained loop reduces to
    /// plain optimistic search on the reward: same actions, same regret
    /// curve, and identically zero violation curves.
    #[test]
    fn never_binding_run_matches_plain_optimism() {
        let domain = Domain::grid_1d(6).unwrap();
        let kernel = KernelSpec::squared_exponential(0.3, 1).unwrap();
        let rewards = vec![0.1, 0.5, 0.35, -0.2, 0.05, 0.45];
        let costs = vec![-0.6; 6];
        let env = BanditEnv::from_functions(
            domain.clone(),
            rewards,
            costs,
            kernel.clone(),
            kernel.clone(),
            NoiseSpec::Gaussian { std: 0.1 },
            NoiseSpec::Gaussian { std: 0.1 },
        )
        .unwrap();
        let horizon = 50;
        let beta = BetaSchedule::new(env.reward_bound(), 0.1, 0.1).unwrap();
        let exp = ResolvedExperiment {
            algorithm: Algorithm::PrimalDual,
            horizon,
            trials: 1,
            base_seed: 3,
            oracle: env.oracle_optimum(0.0).unwrap(),
            slater: env.slater_margin().unwrap(),
            reward_bound: env.reward_bound(),
            cost_bound: env.cost_bound(),
            noise_bound: 0.1,
            alpha: 0.1,
            rho: 4.0 * env.reward_bound() / 0.6,
            v: 1.0,
            slack: 0.0,
            lambda: 1.0 + 2.0 / horizon as f64,
            reward_strategy: ExplorationStrategy::new(
                StrategyKind::Ucb { sign: Sign::Plus },
                beta,
            )
            .unwrap(),
            cost_strategy: ExplorationStrategy::new(
                StrategyKind::Ucb { sign: Sign::Minus },
                beta,
            )
            .unwrap(),
            warnings: vec![],
            write_traces: false,
            out_dir: None,
            env: env.clone(),
        };
        let res = exp.run().unwrap();
        let trace = &res.traces[0];

        // Replay an unconstrained optimistic loop with the same seed and
        // the same reward observations.
        let mut model = GpModel::new(kernel, exp.lambda).unwrap();
        let mut rngs = crate::primal_dual::RunRngs::from_seed(3);
        for (t, record) in trace.iter().enumerate() {
            let mut best = (0, f64::NEG_INFINITY);
            for (j, point) in domain.points().iter().enumerate() {
                let mu = model.posterior_mean(point).unwrap();
                let sd = model.posterior_std(point).unwrap();
                let ucb = (mu + beta.beta(model.running_gain()) * sd)
                    .clamp(-exp.reward_bound, exp.reward_bound);
                if ucb > best.1 {
                    best = (j, ucb);
                }
            }
            assert_eq!(record.action, best.0, "round {}", t + 1);
            let (reward, _) = env.sample_feedback(best.0, &mut rngs.noise).unwrap();
            assert_eq!(record.reward, reward);
            model.observe(domain.point(best.0), reward).unwrap();
        }
        assert!(res.series.violation.mean.iter().all(|&v| v == 0.0));
        assert!(res.series.strong_violation.mean.iter().all(|&v| v == 0.0));
        assert!(res.series.violated_rounds_mean.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn run_experiment_writes_when_output_dir_is_set() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = parse("");
        cfg.experiment.horizon = 5;
        cfg.output.dir = Some(dir.path().join("out").to_string_lossy().into_owned());
        let (_, result) = run_experiment(&cfg).unwrap();
        assert_eq!(result.series.horizon, 5);
        assert!(dir.path().join("out/metrics.csv").is_file());
        assert!(dir.path().join("out/summary.txt").is_file());
        assert!(dir.path().join("out/trace_0000.csv").is_file());
    }
}
