//! Experiment configuration files.
//!
//! Experiments are described by a TOML file with one section per concern:
//!
//! ```toml
//! [experiment]
//! algorithm = "ckb"          # "ckb" | "lyapunov"
//! horizon = 2000
//! trials = 10
//! seed = 42
//!
//! [exploration]
//! reward = "ucb"             # "ucb" | "ts" | "rand-gauss" | "rand-uniform:<n>"
//! cost = "ucb"
//! slack = "off"              # "off" | "zero-violation" | a non-negative number
//!
//! [kernel]
//! family = "se"              # "se" | "matern" | "linear"
//! lengthscale = 0.2
//! # order = 2.5              # matern only: 0.5 | 1.5 | 2.5
//! # cost_family = "matern"   # optional separate cost kernel; defaults to
//! # cost_lengthscale = 0.4   # the reward kernel settings
//!
//! [env]
//! kind = "synthetic"         # "synthetic" | "dataset"
//! domain_size = 100
//! # support_size = 100       # defaults to domain_size
//! noise = "gaussian"         # "gaussian" | "uniform" | "student-t"
//! noise_scale = 0.1
//! # noise_dof = 5.0          # student-t only
//! # path = "arms.csv"        # dataset only (required there)
//! # threshold = "half-b"     # dataset only: "half-b" | a number
//!
//! [overrides]                # optional; defaults are derived at run time
//! # rho = 4.0
//! # v = 25.0
//! # lambda = 1.001
//! # alpha = 0.1
//! # reward_bound = 1.0
//! # cost_bound = 1.0
//! # noise_bound = 0.1
//!
//! [output]
//! # dir = "results"
//! # traces = true
//! ```
//!
//! Unknown keys anywhere are rejected, so typos fail loudly instead of
//! silently running with defaults. This module owns parsing and per-field
//! validation; turning a parsed file into a runnable experiment (filling in
//! derived defaults from the environment) lives in [`crate::harness`].

use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::env::ThresholdRule;
use crate::error::{Error, Result};
use crate::explore::{RandomizerDist, Sign, StrategyKind};
use crate::kernel::{KernelSpec, MaternOrder};

/// Which constrained loop to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    PrimalDual,
    Lyapunov,
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ckb" => Ok(Self::PrimalDual),
            "lyapunov" => Ok(Self::Lyapunov),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?} (expected \"ckb\" or \"lyapunov\")"
            ))),
        }
    }
}

/// Exploration strategy selector, one per model side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategySelector {
    Ucb,
    ThompsonSampling,
    RandGauss,
    RandUniform(usize),
}

impl StrategySelector {
    /// The concrete strategy kind for a side whose optimism direction is
    /// `sign` (rewards `Plus`, costs `Minus`).
    pub fn kind_for(self, sign: Sign) -> StrategyKind {
        match self {
            Self::Ucb => StrategyKind::Ucb { sign },
            Self::ThompsonSampling => StrategyKind::ThompsonSampling,
            Self::RandGauss => StrategyKind::RandUcb {
                dist: RandomizerDist::Gaussian,
                sign,
            },
            Self::RandUniform(points) => StrategyKind::RandUcb {
                dist: RandomizerDist::UniformDiscrete { points },
                sign,
            },
        }
    }
}

impl FromStr for StrategySelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ucb" => return Ok(Self::Ucb),
            "ts" => return Ok(Self::ThompsonSampling),
            "rand-gauss" => return Ok(Self::RandGauss),
            _ => {}
        }
        if let Some(arg) = s.strip_prefix("rand-uniform:") {
            let points: usize = arg.parse().map_err(|_| {
                Error::Config(format!("invalid grid size {arg:?} in \"rand-uniform:<n>\""))
            })?;
            if points < 2 {
                return Err(Error::Config(format!(
                    "rand-uniform needs at least 2 grid points, got {points}"
                )));
            }
            return Ok(Self::RandUniform(points));
        }
        Err(Error::Config(format!(
            "unknown exploration strategy {s:?} (expected \"ucb\", \"ts\", \
             \"rand-gauss\", or \"rand-uniform:<n>\")"
        )))
    }
}

/// Constraint-tightening mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlackSetting {
    /// No tightening (`slack = 0`).
    Off,
    /// Derive the zero-violation slack from the environment at run time.
    ZeroViolation,
    /// Explicit non-negative slack.
    Fixed(f64),
}

impl<'de> Deserialize<'de> for SlackSetting {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Value(f64),
        }
        match Raw::deserialize(de)? {
            Raw::Text(s) => match s.as_str() {
                "off" => Ok(Self::Off),
                "zero-violation" => Ok(Self::ZeroViolation),
                other => Err(serde::de::Error::custom(format!(
                    "unknown slack mode {other:?} (expected \"off\", \"zero-violation\", \
                     or a number)"
                ))),
            },
            Raw::Value(v) if v.is_finite() && v >= 0.0 => Ok(Self::Fixed(v)),
            Raw::Value(v) => Err(serde::de::Error::custom(format!(
                "slack must be non-negative and finite, got {v}"
            ))),
        }
    }
}

/// Dataset cost threshold: the `h` in `g = -f + h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSetting {
    HalfMaxReward,
    Fixed(f64),
}

impl ThresholdSetting {
    pub fn rule(self) -> ThresholdRule {
        match self {
            Self::HalfMaxReward => ThresholdRule::HalfMaxReward,
            Self::Fixed(v) => ThresholdRule::Fixed(v),
        }
    }
}

impl<'de> Deserialize<'de> for ThresholdSetting {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Value(f64),
        }
        match Raw::deserialize(de)? {
            Raw::Text(s) if s == "half-b" => Ok(Self::HalfMaxReward),
            Raw::Text(other) => Err(serde::de::Error::custom(format!(
                "unknown threshold {other:?} (expected \"half-b\" or a number)"
            ))),
            Raw::Value(v) if v.is_finite() => Ok(Self::Fixed(v)),
            Raw::Value(v) => Err(serde::de::Error::custom(format!(
                "threshold must be finite, got {v}"
            ))),
        }
    }
}

fn default_trials() -> usize {
    1
}

fn default_algorithm() -> String {
    "ckb".into()
}

fn default_strategy() -> String {
    "ucb".into()
}

fn default_env_kind() -> String {
    "synthetic".into()
}

fn default_domain_size() -> usize {
    100
}

fn default_noise() -> String {
    "gaussian".into()
}

fn default_noise_scale() -> f64 {
    0.1
}

fn default_traces() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_algorithm")]
    pub algorithm: String,
    pub horizon: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationSection {
    #[serde(default = "default_strategy")]
    pub reward: String,
    #[serde(default = "default_strategy")]
    pub cost: String,
    #[serde(default)]
    pub slack: Option<SlackSetting>,
}

impl Default for ExplorationSection {
    fn default() -> Self {
        Self {
            reward: default_strategy(),
            cost: default_strategy(),
            slack: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub family: String,
    #[serde(default)]
    pub lengthscale: Option<f64>,
    #[serde(default)]
    pub order: Option<f64>,
    #[serde(default)]
    pub cost_family: Option<String>,
    #[serde(default)]
    pub cost_lengthscale: Option<f64>,
    #[serde(default)]
    pub cost_order: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    #[serde(default = "default_env_kind")]
    pub kind: String,
    #[serde(default = "default_domain_size")]
    pub domain_size: usize,
    #[serde(default)]
    pub support_size: Option<usize>,
    #[serde(default = "default_noise")]
    pub noise: String,
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
    #[serde(default)]
    pub noise_dof: Option<f64>,
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub columns: Option<Vec<String>>,
    #[serde(default)]
    pub threshold: Option<ThresholdSetting>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverridesSection {
    pub rho: Option<f64>,
    pub v: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub reward_bound: Option<f64>,
    pub cost_bound: Option<f64>,
    pub noise_bound: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default = "default_traces")]
    pub traces: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            traces: default_traces(),
        }
    }
}

/// A parsed experiment file. Field-level validation happens during parsing
/// and in [`ConfigFile::validate`]; derived defaults (Theorem-style `rho`,
/// `v`, slack values) are resolved later against the environment.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub exploration: ExplorationSection,
    #[serde(default)]
    pub kernel: Option<KernelSection>,
    pub env: EnvSection,
    #[serde(default)]
    pub overrides: OverridesSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn kernel_from_parts(
    family: &str,
    lengthscale: Option<f64>,
    order: Option<f64>,
) -> Result<KernelSpec> {
    let need_lengthscale = || {
        lengthscale.ok_or_else(|| {
            Error::Config(format!("kernel family {family:?} requires a lengthscale"))
        })
    };
    match family {
        "se" => {
            if order.is_some() {
                return Err(Error::Config(
                    "\"order\" only applies to the matern family".into(),
                ));
            }
            KernelSpec::squared_exponential(need_lengthscale()?, 1)
        }
        "matern" => {
            let order = order
                .ok_or_else(|| Error::Config("matern kernel requires \"order\"".into()))?;
            let order = match order {
                o if o == 0.5 => MaternOrder::Half,
                o if o == 1.5 => MaternOrder::ThreeHalves,
                o if o == 2.5 => MaternOrder::FiveHalves,
                o => {
                    return Err(Error::Config(format!(
                        "matern order must be 0.5, 1.5, or 2.5, got {o}"
                    )))
                }
            };
            KernelSpec::matern(need_lengthscale()?, order, 1)
        }
        "linear" => {
            if lengthscale.is_some() || order.is_some() {
                return Err(Error::Config(
                    "the linear kernel takes no lengthscale or order".into(),
                ));
            }
            KernelSpec::linear(1)
        }
        other => Err(Error::Config(format!(
            "unknown kernel family {other:?} (expected \"se\", \"matern\", or \"linear\")"
        ))),
    }
}

impl ConfigFile {
    /// Parses and validates a config from TOML text.
    pub fn parse(text: &str) -> Result<Self> {
        let file: Self =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        file.validate()?;
        Ok(file)
    }

    /// Reads and parses a config file from disk.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.experiment.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.algorithm()?;
        self.reward_selector()?;
        self.cost_selector()?;
        match self.env.kind.as_str() {
            "synthetic" => {
                if self.env.path.is_some() || self.env.columns.is_some() {
                    return Err(Error::Config(
                        "\"path\" and \"columns\" only apply to dataset environments".into(),
                    ));
                }
                if self.env.threshold.is_some() {
                    return Err(Error::Config(
                        "\"threshold\" only applies to dataset environments".into(),
                    ));
                }
                if self.env.domain_size == 0 {
                    return Err(Error::Config("domain_size must be at least 1".into()));
                }
                if self.kernel.is_none() {
                    return Err(Error::Config(
                        "synthetic environments require a [kernel] section".into(),
                    ));
                }
                self.reward_kernel()?;
                self.cost_kernel()?;
                self.synthetic_noise()?;
            }
            "dataset" => {
                if self.env.path.is_none() {
                    return Err(Error::Config(
                        "dataset environments require \"path\"".into(),
                    ));
                }
                if self.kernel.is_some() {
                    return Err(Error::Config(
                        "dataset environments derive their kernel from the data; \
                         remove the [kernel] section"
                            .into(),
                    ));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown env kind {other:?} (expected \"synthetic\" or \"dataset\")"
                )));
            }
        }
        for (name, v) in [
            ("rho", self.overrides.rho),
            ("v", self.overrides.v),
            ("lambda", self.overrides.lambda),
            ("reward_bound", self.overrides.reward_bound),
            ("cost_bound", self.overrides.cost_bound),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!(
                        "override {name} must be positive and finite, got {v}"
                    )));
                }
            }
        }
        if let Some(a) = self.overrides.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!(
                    "override alpha must lie in (0, 1), got {a}"
                )));
            }
        }
        if let Some(r) = self.overrides.noise_bound {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Config(format!(
                    "override noise_bound must be non-negative and finite, got {r}"
                )));
            }
        }
        Ok(())
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        self.experiment.algorithm.parse()
    }

    pub fn reward_selector(&self) -> Result<StrategySelector> {
        self.exploration.reward.parse()
    }

    pub fn cost_selector(&self) -> Result<StrategySelector> {
        self.exploration.cost.parse()
    }

    /// Slack mode; absent means off.
    pub fn slack(&self) -> SlackSetting {
        self.exploration.slack.unwrap_or(SlackSetting::Off)
    }

    /// Kernel for the reward model (synthetic environments only).
    pub fn reward_kernel(&self) -> Result<KernelSpec> {
        let k = self
            .kernel
            .as_ref()
            .ok_or_else(|| Error::Config("missing [kernel] section".into()))?;
        kernel_from_parts(&k.family, k.lengthscale, k.order)
    }

    /// Kernel for the cost model; falls back to the reward kernel settings
    /// field by field.
    pub fn cost_kernel(&self) -> Result<KernelSpec> {
        let k = self
            .kernel
            .as_ref()
            .ok_or_else(|| Error::Config("missing [kernel] section".into()))?;
        match (&k.cost_family, k.cost_lengthscale, k.cost_order) {
            (None, None, None) => self.reward_kernel(),
            (family, lengthscale, order) => kernel_from_parts(
                family.as_deref().unwrap_or(&k.family),
                lengthscale.or(k.lengthscale),
                order.or(k.order),
            ),
        }
    }

    /// Observation-noise distribution for synthetic environments.
    pub fn synthetic_noise(&self) -> Result<crate::env::NoiseSpec> {
        use crate::env::NoiseSpec;
        let scale = self.env.noise_scale;
        let spec = match self.env.noise.as_str() {
            "gaussian" => NoiseSpec::Gaussian { std: scale },
            "uniform" => NoiseSpec::Uniform { half_width: scale },
            "student-t" => NoiseSpec::StudentT {
                dof: self.env.noise_dof.ok_or_else(|| {
                    Error::Config("student-t noise requires \"noise_dof\"".into())
                })?,
                scale,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown noise {other:?} (expected \"gaussian\", \"uniform\", \
                     or \"student-t\")"
                )))
            }
        };
        if !matches!(spec, NoiseSpec::StudentT { .. }) && self.env.noise_dof.is_some() {
            return Err(Error::Config(
                "\"noise_dof\" only applies to student-t noise".into(),
            ));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Command-line overrides applied on top of a parsed file.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub out: Option<String>,
    pub trials: Option<usize>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub algorithm: Option<String>,
    /// Sets both the reward and cost strategies.
    pub exploration: Option<String>,
    pub slack: Option<String>,
}

impl CliOverrides {
    pub fn apply(&self, config: &mut ConfigFile) -> Result<()> {
        if let Some(out) = &self.out {
            config.output.dir = Some(out.clone());
        }
        if let Some(trials) = self.trials {
            config.experiment.trials = trials;
        }
        if let Some(horizon) = self.horizon {
            config.experiment.horizon = horizon;
        }
        if let Some(seed) = self.seed {
            config.experiment.seed = seed;
        }
        if let Some(alg) = &self.algorithm {
            config.experiment.algorithm = alg.clone();
        }
        if let Some(strategy) = &self.exploration {
            config.exploration.reward = strategy.clone();
            config.exploration.cost = strategy.clone();
        }
        if let Some(slack) = &self.slack {
            config.exploration.slack = Some(match slack.as_str() {
                "off" => SlackSetting::Off,
                "zero-violation" => SlackSetting::ZeroViolation,
                other => {
                    let v: f64 = other.parse().map_err(|_| {
                        Error::Config(format!(
                            "invalid slack {other:?} (expected \"off\", \"zero-violation\", \
                             or a number)"
                        ))
                    })?;
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(Error::Config(format!(
                            "slack must be non-negative and finite, got {v}"
                        )));
                    }
                    SlackSetting::Fixed(v)
                }
            });
        }
        config.validate()
    }
}
