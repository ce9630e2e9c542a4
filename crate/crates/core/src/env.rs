//! Bandit environments: ground-truth functions, feedback noise, and the
//! offline baseline.
//!
//! An environment is a finite domain together with a reward function `f` to
//! maximize and a cost function `g` whose long-run average must stay
//! non-positive. Two constructions are provided:
//!
//! * [`generate_synthetic`] draws `f` and `g` as random kernel combinations
//!   `sum_i a_i k(., x_i)` over a uniform 1-d grid, redrawing until the
//!   constraint has enough slack (a strictly feasible point with margin at
//!   least `1e-3`).
//! * [`load_dataset`] treats each CSV column as one arm: the reward is the
//!   column mean, the cost is `g = -f + h` for a threshold `h`, feedback
//!   noise is bootstrapped from the column residuals, and the surrogate
//!   kernel is the (clipped, rescaled) correlation matrix of the columns.
//!
//! The offline baseline is the best *distribution* over arms subject to the
//! average-cost constraint — a two-variable linear program whose optimum
//! needs at most two support points, found here by direct enumeration
//! ([`oracle_optimum`]). The constraint slack `delta` (Slater margin) is
//! `min(1, -min_x g(x))`, capped at one because every analysis constant that
//! divides by `delta` assumes it is at most the range bound.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, StudentT};

use crate::error::{Error, Result};
use crate::kernel::{Domain, KernelSpec};

/// Minimum acceptable Slater margin for generated instances.
const MIN_SLATER: f64 = 1e-3;

/// Retry budget for synthetic generation.
const MAX_GENERATION_ATTEMPTS: usize = 100;

/// Parametric observation-noise families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// Zero-mean Gaussian with standard deviation `std`.
    Gaussian { std: f64 },
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// Student-t with `dof > 2` (so the variance exists), scaled by `scale`.
    /// Heavy-tailed: *not* sub-Gaussian, and flagged as such.
    StudentT { dof: f64, scale: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Gaussian { std } if std >= 0.0 && std.is_finite() => Ok(()),
            NoiseSpec::Uniform { half_width } if half_width >= 0.0 && half_width.is_finite() => {
                Ok(())
            }
            NoiseSpec::StudentT { dof, scale } if dof > 2.0 && scale >= 0.0 => Ok(()),
            _ => Err(Error::InvalidInput(format!("invalid noise spec: {self:?}"))),
        }
    }

    /// Scale handed to confidence-width schedules. For the sub-Gaussian
    /// families this is the sub-Gaussian parameter; for Student-t it is the
    /// actual standard deviation, which is only a stand-in.
    pub fn nominal_scale(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { std } => std,
            NoiseSpec::Uniform { half_width } => half_width,
            NoiseSpec::StudentT { dof, scale } => scale * (dof / (dof - 2.0)).sqrt(),
        }
    }

    pub fn is_sub_gaussian(&self) -> bool {
        !matches!(self, NoiseSpec::StudentT { .. })
    }

    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            NoiseSpec::Gaussian { std } => {
                if std == 0.0 {
                    0.0
                } else {
                    Normal::new(0.0, std).expect("validated").sample(rng)
                }
            }
            NoiseSpec::Uniform { half_width } => {
                half_width * (2.0 * rng.random::<f64>() - 1.0)
            }
            NoiseSpec::StudentT { dof, scale } => {
                scale * StudentT::new(dof).expect("validated").sample(rng)
            }
        }
    }
}

/// Observation noise attached to one signal of an environment.
#[derive(Debug, Clone)]
enum NoiseModel {
    Parametric(NoiseSpec),
    /// Resample (uniformly) from per-arm residual pools; `negate` flips the
    /// draw, which is how cost noise mirrors reward residuals under
    /// `g = -f + h`.
    Bootstrap {
        pools: Arc<Vec<Vec<f64>>>,
        negate: bool,
        scale: f64,
    },
}

impl NoiseModel {
    fn draw(&self, arm: usize, rng: &mut dyn RngCore) -> f64 {
        match self {
            NoiseModel::Parametric(spec) => spec.draw(rng),
            NoiseModel::Bootstrap { pools, negate, .. } => {
                let pool = &pools[arm];
                let e = pool[rng.random_range(0..pool.len())];
                if *negate {
                    -e
                } else {
                    e
                }
            }
        }
    }

    fn scale(&self) -> f64 {
        match self {
            NoiseModel::Parametric(spec) => spec.nominal_scale(),
            NoiseModel::Bootstrap { scale, .. } => *scale,
        }
    }

    fn is_sub_gaussian(&self) -> bool {
        match self {
            NoiseModel::Parametric(spec) => spec.is_sub_gaussian(),
            NoiseModel::Bootstrap { .. } => true, // bounded pools
        }
    }
}

/// How an environment was built; carried along for run summaries.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvKind {
    Synthetic { seed: u64, attempts: usize },
    Dataset { threshold: f64, rows: usize },
    Custom,
}

/// A fully specified bandit instance: domain, ground truth, noise, and the
/// kernels the surrogate models should use.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    domain: Domain,
    rewards: Vec<f64>,
    costs: Vec<f64>,
    reward_kernel: KernelSpec,
    cost_kernel: KernelSpec,
    reward_noise: NoiseModel,
    cost_noise: NoiseModel,
    reward_bound: f64,
    cost_bound: f64,
    kind: EnvKind,
}

impl BanditEnv {
    /// Builds an environment from explicitly tabulated ground truth, one
    /// reward and cost value per domain point. Feasibility is *not* checked
    /// here — [`BanditEnv::slater_margin`] still reports it — so
    /// deliberately infeasible instances can be constructed for testing.
    #[allow(clippy::too_many_arguments)]
    pub fn from_functions(
        domain: Domain,
        rewards: Vec<f64>,
        costs: Vec<f64>,
        reward_kernel: KernelSpec,
        cost_kernel: KernelSpec,
        reward_noise: NoiseSpec,
        cost_noise: NoiseSpec,
    ) -> Result<Self> {
        if rewards.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                got: rewards.len(),
            });
        }
        if costs.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                got: costs.len(),
            });
        }
        if rewards.iter().chain(costs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("ground-truth values must be finite".into()));
        }
        reward_noise.validate()?;
        cost_noise.validate()?;
        let reward_bound = max_abs(&rewards);
        let cost_bound = max_abs(&costs);
        if !(reward_bound > 0.0) || !(cost_bound > 0.0) {
            return Err(Error::InvalidInput(
                "reward and cost functions must not be identically zero".into(),
            ));
        }
        Ok(Self {
            domain,
            rewards,
            costs,
            reward_kernel,
            cost_kernel,
            reward_noise: NoiseModel::Parametric(reward_noise),
            cost_noise: NoiseModel::Parametric(cost_noise),
            reward_bound,
            cost_bound,
            kind: EnvKind::Custom,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Ground-truth reward at every domain point.
    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Ground-truth cost at every domain point.
    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Range bound `B = max |f|`, also used as the surrogate norm bound.
    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    /// Range bound `G = max |g|`.
    pub fn cost_bound(&self) -> f64 {
        self.cost_bound
    }

    pub fn reward_kernel(&self) -> &KernelSpec {
        &self.reward_kernel
    }

    pub fn cost_kernel(&self) -> &KernelSpec {
        &self.cost_kernel
    }

    /// Noise scales `(reward, cost)` for confidence-width schedules.
    pub fn noise_scales(&self) -> (f64, f64) {
        (self.reward_noise.scale(), self.cost_noise.scale())
    }

    /// False if either noise model is heavy-tailed (Student-t), in which case
    /// the sub-Gaussian confidence analysis does not strictly apply.
    pub fn noise_is_sub_gaussian(&self) -> bool {
        self.reward_noise.is_sub_gaussian() && self.cost_noise.is_sub_gaussian()
    }

    pub fn kind(&self) -> &EnvKind {
        &self.kind
    }

    /// Constraint slack `min(1, -min_x g(x))`; errors if no point is
    /// strictly feasible.
    pub fn slater_margin(&self) -> Result<f64> {
        slater_margin(&self.costs)
    }

    /// Best feasible mixture value under the constraint shifted by
    /// `epsilon`; see [`oracle_optimum`].
    pub fn oracle_optimum(&self, epsilon: f64) -> Result<OracleSolution> {
        oracle_optimum(&self.rewards, &self.costs, epsilon)
    }

    /// Draws one noisy feedback pair `(r, c)` for the chosen arm. The reward
    /// noise is drawn first, then the cost noise, independently.
    pub fn sample_feedback(&self, action: usize, rng: &mut dyn RngCore) -> Result<(f64, f64)> {
        if action >= self.domain.len() {
            return Err(Error::InvalidInput(format!(
                "action index {action} out of range for domain of size {}",
                self.domain.len()
            )));
        }
        let r = self.rewards[action] + self.reward_noise.draw(action, rng);
        let c = self.costs[action] + self.cost_noise.draw(action, rng);
        Ok((r, c))
    }
}

/// Recipe for [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticOpts {
    /// Kernel for drawing and modeling the reward (must be 1-dimensional).
    pub reward_kernel: KernelSpec,
    /// Kernel for drawing and modeling the cost.
    pub cost_kernel: KernelSpec,
    /// Grid size of the domain on `[0, 1]`.
    pub domain_size: usize,
    /// Number of kernel-combination terms per function.
    pub support_size: usize,
    pub reward_noise: NoiseSpec,
    pub cost_noise: NoiseSpec,
}

/// Evaluates `sum_i coeffs[i].1 * k(x_j, domain[coeffs[i].0])` over the whole
/// domain — the kernel-combination form both synthetic functions take.
pub fn kernel_combination(
    kernel: &KernelSpec,
    domain: &Domain,
    terms: &[(usize, f64)],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; domain.len()];
    for &(idx, coeff) in terms {
        if idx >= domain.len() {
            return Err(Error::InvalidInput(format!(
                "support index {idx} out of range for domain of size {}",
                domain.len()
            )));
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o += coeff * kernel.evaluate(domain.point(j), domain.point(idx))?;
        }
    }
    Ok(out)
}

/// Draws a synthetic instance: both functions are random kernel combinations
/// with coefficients uniform on `[-1, 1]` and support points uniform on the
/// grid. Instances are redrawn (up to 100 times, advancing the seeded stream)
/// until the reward is non-degenerate and the constraint has Slater margin at
/// least `1e-3`.
pub fn generate_synthetic(opts: &SyntheticOpts, seed: u64) -> Result<BanditEnv> {
    if opts.domain_size < 2 {
        return Err(Error::InvalidInput(format!(
            "synthetic domain needs at least 2 grid points, got {}",
            opts.domain_size
        )));
    }
    if opts.support_size == 0 {
        return Err(Error::InvalidInput(
            "synthetic functions need at least one kernel-combination term".into(),
        ));
    }
    for k in [&opts.reward_kernel, &opts.cost_kernel] {
        if k.dim() != 1 {
            return Err(Error::InvalidInput(format!(
                "synthetic generation uses a 1-d grid; kernel has dimension {}",
                k.dim()
            )));
        }
    }
    opts.reward_noise.validate()?;
    opts.cost_noise.validate()?;

    let domain = Domain::grid_1d(opts.domain_size)?;
    // Dedicated stream: run-time RNGs derive low stream numbers from the
    // trial seed, and the environment must not share their sequences even
    // when the seeds coincide.
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    for attempt in 1..=MAX_GENERATION_ATTEMPTS {
        let rewards = draw_combination(&opts.reward_kernel, &domain, opts.support_size, &mut rng)?;
        let costs = draw_combination(&opts.cost_kernel, &domain, opts.support_size, &mut rng)?;
        let reward_bound = max_abs(&rewards);
        let cost_bound = max_abs(&costs);
        let feasible = matches!(slater_margin(&costs), Ok(m) if m >= MIN_SLATER);
        if reward_bound > 0.0 && cost_bound > 0.0 && feasible {
            return Ok(BanditEnv {
                domain,
                rewards,
                costs,
                reward_kernel: opts.reward_kernel.clone(),
                cost_kernel: opts.cost_kernel.clone(),
                reward_noise: NoiseModel::Parametric(opts.reward_noise),
                cost_noise: NoiseModel::Parametric(opts.cost_noise),
                reward_bound,
                cost_bound,
                kind: EnvKind::Synthetic { seed, attempts: attempt },
            });
        }
    }
    Err(Error::Generation {
        attempts: MAX_GENERATION_ATTEMPTS,
        reason: "no draw had a strictly feasible constraint with the required margin",
    })
}

fn draw_combination(
    kernel: &KernelSpec,
    domain: &Domain,
    support: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>> {
    let terms: Vec<(usize, f64)> = (0..support)
        .map(|_| {
            (
                rng.random_range(0..domain.len()),
                rng.random_range(-1.0..=1.0),
            )
        })
        .collect();
    kernel_combination(kernel, domain, &terms)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Slater margin of a cost vector: `min(1, -min_j g_j)`, requiring at least
/// one strictly feasible point.
pub fn slater_margin(costs: &[f64]) -> Result<f64> {
    let min = costs
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if costs.is_empty() || !(min < 0.0) {
        return Err(Error::Infeasible(format!(
            "no strictly feasible point: min cost is {min}"
        )));
    }
    Ok((-min).min(1.0))
}

/// Optimal mixture over arms for `max E[f]` subject to `E[g] + epsilon <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub value: f64,
    /// At most two `(arm, weight)` pairs with positive weights summing to 1.
    pub support: Vec<(usize, f64)>,
}

/// Solves the constrained-mixture linear program by enumeration. An optimal
/// mixture needs at most two arms: either a single feasible arm, or a pair
/// straddling the shifted constraint weighted to make it bind. Single-arm
/// solutions are preferred on value ties, and lower indices win among equals,
/// so the result is deterministic.
pub fn oracle_optimum(rewards: &[f64], costs: &[f64], epsilon: f64) -> Result<OracleSolution> {
    if rewards.is_empty() || rewards.len() != costs.len() {
        return Err(Error::DimensionMismatch {
            expected: rewards.len(),
            got: costs.len(),
        });
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "constraint shift must be non-negative and finite, got {epsilon}"
        )));
    }
    let shifted: Vec<f64> = costs.iter().map(|c| c + epsilon).collect();
    let mut best: Option<OracleSolution> = None;
    let mut consider = |value: f64, support: Vec<(usize, f64)>| {
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(OracleSolution { value, support });
        }
    };
    for (i, (&f, &s)) in rewards.iter().zip(shifted.iter()).enumerate() {
        if s <= 0.0 {
            consider(f, vec![(i, 1.0)]);
        }
    }
    for (i, &si) in shifted.iter().enumerate() {
        if !(si < 0.0) {
            continue;
        }
        for (j, &sj) in shifted.iter().enumerate() {
            if !(sj > 0.0) {
                continue;
            }
            // Weight on i that makes the shifted constraint bind exactly.
            let w = sj / (sj - si);
            let value = w * rewards[i] + (1.0 - w) * rewards[j];
            consider(value, vec![(i, w), (j, 1.0 - w)]);
        }
    }
    best.ok_or_else(|| {
        Error::Infeasible("no arm satisfies the shifted constraint, even fractionally".into())
    })
}

/// Threshold rule for dataset environments: the cost is `g = -f + h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// `h = B / 2` where `B = max |column mean|`.
    HalfMaxReward,
    /// Explicit threshold value.
    Fixed(f64),
}

/// Options for [`load_dataset`].
#[derive(Debug, Clone, Default)]
pub struct DatasetOpts {
    /// Columns to use as arms, in order; `None` takes every column in header
    /// order.
    pub columns: Option<Vec<String>>,
    pub threshold: Option<ThresholdRule>,
}

/// Loads a CSV with one column per arm and one sample per row. Rewards are
/// column means; costs are `-f + h`; feedback noise resamples the column
/// residuals (negated for the cost side); the surrogate kernel for both
/// signals is the residual correlation matrix, eigenvalue-clipped at zero and
/// rescaled to a unit diagonal.
pub fn load_dataset(path: &Path, opts: &DatasetOpts) -> Result<BanditEnv> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::InvalidInput(format!("bad CSV header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();

    let selected: Vec<usize> = match &opts.columns {
        None => (0..headers.len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                headers.iter().position(|h| h == n).ok_or_else(|| {
                    Error::InvalidInput(format!("column {n:?} not found in CSV header"))
                })
            })
            .collect::<Result<_>>()?,
    };
    if selected.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "dataset needs at least 2 arm columns, got {}",
            selected.len()
        )));
    }

    let n = selected.len();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (r, record) in reader.records().enumerate() {
        let row = r + 2; // 1-based, header is row 1
        let record = record.map_err(|e| Error::Dataset {
            row,
            col: 0,
            msg: e.to_string(),
        })?;
        for (k, &c) in selected.iter().enumerate() {
            let cell = record.get(c).ok_or(Error::Dataset {
                row,
                col: c + 1,
                msg: "missing field".into(),
            })?;
            let v: f64 = cell.parse().map_err(|_| Error::Dataset {
                row,
                col: c + 1,
                msg: format!("cannot parse {cell:?} as a number"),
            })?;
            samples[k].push(v);
        }
    }
    let rows = samples[0].len();
    if rows == 0 {
        return Err(Error::InvalidInput("dataset has no data rows".into()));
    }

    let rewards: Vec<f64> = samples
        .iter()
        .map(|col| col.iter().sum::<f64>() / rows as f64)
        .collect();
    let reward_bound = max_abs(&rewards);
    let h = match opts.threshold.unwrap_or(ThresholdRule::HalfMaxReward) {
        ThresholdRule::HalfMaxReward => reward_bound / 2.0,
        ThresholdRule::Fixed(v) => v,
    };
    let costs: Vec<f64> = rewards.iter().map(|f| -f + h).collect();
    let cost_bound = max_abs(&costs);
    slater_margin(&costs)?; // fail fast if the instance is infeasible
    if !(reward_bound > 0.0) || !(cost_bound > 0.0) {
        return Err(Error::InvalidInput(
            "dataset yields a degenerate (all-zero) reward or cost".into(),
        ));
    }

    let pools: Vec<Vec<f64>> = samples
        .iter()
        .zip(rewards.iter())
        .map(|(col, mean)| col.iter().map(|v| v - mean).collect())
        .collect();
    let noise_scale = pools.iter().map(|p| max_abs(p)).fold(0.0, f64::max);
    let kernel = KernelSpec::precomputed(residual_correlation(&pools))?;
    let pools = Arc::new(pools);

    Ok(BanditEnv {
        domain: Domain::indices(n)?,
        rewards,
        costs,
        reward_kernel: kernel.clone(),
        cost_kernel: kernel,
        reward_noise: NoiseModel::Bootstrap {
            pools: Arc::clone(&pools),
            negate: false,
            scale: noise_scale,
        },
        cost_noise: NoiseModel::Bootstrap {
            pools,
            negate: true,
            scale: noise_scale,
        },
        reward_bound,
        cost_bound,
        kind: EnvKind::Dataset { threshold: h, rows },
    })
}

/// Correlation matrix of the residual columns, made usable as a kernel:
/// degenerate (constant) columns fall back to an identity row, eigenvalues
/// are clipped at zero to restore positive semidefiniteness, and the result
/// is rescaled to an exactly unit diagonal.
fn residual_correlation(pools: &[Vec<f64>]) -> DMatrix<f64> {
    let n = pools.len();
    let rows = pools[0].len();
    let denom = (rows.max(2) - 1) as f64;
    let stds: Vec<f64> = pools
        .iter()
        .map(|p| (p.iter().map(|v| v * v).sum::<f64>() / denom).sqrt())
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = if stds[i] > 0.0 && stds[j] > 0.0 {
                let cov = pools[i]
                    .iter()
                    .zip(pools[j].iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / denom;
                cov / (stds[i] * stds[j])
            } else if i == j {
                1.0
            } else {
                0.0
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    // Clip negative eigenvalues (finite-sample noise can push the estimate
    // slightly indefinite), then force the diagonal back to exactly one.
    let eig = SymmetricEigen::new(m);
    let vals = eig.eigenvalues.map(|v| v.max(0.0));
    let mut m = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                m[(i, j)] = 1.0;
            } else if diag[i] > 0.0 && diag[j] > 0.0 {
                m[(i, j)] /= (diag[i] * diag[j]).sqrt();
            } else {
                m[(i, j)] = 0.0;
            }
        }
    }
    m
}
