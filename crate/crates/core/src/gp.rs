//! Gaussian process posterior with incremental updates.
//!
//! The regression model is standard kernel ridge / GP regression: after `t`
//! observations `(x_s, y_s)` the posterior mean and covariance at query
//! points are
//!
//! ```text
//! mu_t(x)      = k_t(x)^T (K_t + lambda I)^-1 y_{1..t}
//! k_t(x, x')   = k(x, x') - k_t(x)^T (K_t + lambda I)^-1 k_t(x')
//! sigma_t^2(x) = k_t(x, x)
//! ```
//!
//! with `mu_0 = 0` and `sigma_0^2(x) = k(x, x)`. Nothing is ever
//! refactorized: each observation appends one row to a packed Cholesky factor
//! of `K_t + lambda I` in O(t^2), and a solved representation of the targets
//! is extended alongside it in O(t).
//!
//! Because the bandit loop queries the same finite domain every round, the
//! model can *track* a domain: it then maintains, per observation, the solved
//! cross-covariance row against every domain point, giving O(1) reads of all
//! posterior means and variances each round and O(t·n) update cost per
//! observation instead of O(n·t^2) per round. Optionally the full posterior
//! covariance over the tracked domain is kept up to date by rank-1 downdates,
//! which is what joint (Thompson) sampling consumes.
//!
//! The model also accumulates the information gain of its own observation
//! sequence, `0.5 * sum ln(1 + sigma_{t-1}^2(x_t) / lambda)`; confidence-width
//! schedules read it back instead of recomputing log-determinants.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::chol::{semidefinite_factor, PackedLower};
use crate::error::{Error, Result};
use crate::kernel::{Domain, KernelSpec};

/// Posterior variances this far below zero are treated as roundoff and
/// clamped; anything lower is reported as numerical degeneracy.
const VAR_TOL: f64 = 1e-10;

/// Diagonal jitter added to joint-sample covariances before factorization.
const SAMPLE_JITTER: f64 = 1e-8;

/// Pivot threshold below which a joint-sample direction is treated as
/// deterministic (no fresh noise). Keeps exact-duplicate query points getting
/// equal samples; see `chol::semidefinite_factor`.
const SAMPLE_DROP_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
struct DomainCache {
    domain: Domain,
    /// Solved cross-covariance rows, one per observation, flattened with
    /// stride `domain.len()`: row `t` is `(L^-1 K_{t,domain})_t`.
    rows: Vec<f64>,
    /// Posterior mean at every domain point.
    mean: Vec<f64>,
    /// Posterior variance at every domain point (clamped on read).
    var: Vec<f64>,
    /// Full posterior covariance over the domain, if requested.
    cov: Option<DMatrix<f64>>,
}

/// GP / kernel ridge posterior over a fixed kernel, updated one observation
/// at a time.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: KernelSpec,
    lambda: f64,
    points: Vec<Vec<f64>>,
    targets: Vec<f64>,
    /// Packed Cholesky factor of `K_t + lambda I`.
    factor: PackedLower,
    /// `L^-1 y_{1..t}`, extended with each observation.
    half_weights: Vec<f64>,
    gain: f64,
    cache: Option<DomainCache>,
}

impl GpModel {
    /// Creates an empty model. `lambda` is the noise ridge and must be
    /// positive; it also lower-bounds every future Cholesky pivot, which is
    /// what keeps the incremental factorization stable.
    pub fn new(kernel: KernelSpec, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise ridge lambda must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self {
            kernel,
            lambda,
            points: Vec::new(),
            targets: Vec::new(),
            factor: PackedLower::new(),
            half_weights: Vec::new(),
            gain: 0.0,
            cache: None,
        })
    }

    /// Empty model that immediately tracks `domain`.
    pub fn with_tracked_domain(
        kernel: KernelSpec,
        lambda: f64,
        domain: &Domain,
        track_cov: bool,
    ) -> Result<Self> {
        let mut m = Self::new(kernel, lambda)?;
        m.track_domain(domain, track_cov)?;
        Ok(m)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of observations absorbed so far.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Accumulated information gain of the observed sequence,
    /// `0.5 * sum_s ln(1 + sigma_{s-1}^2(x_s) / lambda)`. Equals the
    /// batch value `0.5 ln det(I + K_t / lambda)` up to roundoff.
    pub fn running_gain(&self) -> f64 {
        self.gain
    }

    /// Starts (or replaces) domain tracking, replaying any existing
    /// observations so the cache is as if tracking had been on from the
    /// start. `track_cov` additionally maintains the full posterior
    /// covariance over the domain for joint sampling.
    pub fn track_domain(&mut self, domain: &Domain, track_cov: bool) -> Result<()> {
        let n = domain.len();
        let mut cache = DomainCache {
            domain: domain.clone(),
            rows: Vec::with_capacity(n * self.points.len()),
            mean: vec![0.0; n],
            var: (0..n)
                .map(|j| self.kernel.evaluate(domain.point(j), domain.point(j)))
                .collect::<Result<Vec<_>>>()?,
            cov: if track_cov {
                Some(self.kernel.gram(domain.points())?)
            } else {
                None
            },
        };
        for t in 0..self.points.len() {
            let kx = self.cross_row(&cache.domain, t)?;
            Self::push_cache_row(&mut cache, &self.factor, t, kx, self.half_weights[t]);
        }
        self.cache = Some(cache);
        Ok(())
    }

    /// Absorbs one observation. O(t^2) for the factor extension plus
    /// O(t·n) for the tracked-domain cache (if any).
    pub fn observe(&mut self, x: &[f64], y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::InvalidInput(format!(
                "observation target must be finite, got {y}"
            )));
        }
        let t = self.points.len();
        let mut cross = Vec::with_capacity(t);
        for p in &self.points {
            cross.push(self.kernel.evaluate(x, p)?);
        }
        let prior = self.kernel.evaluate(x, x)?;
        let pivot = self.factor.extend(cross, prior + self.lambda)?;
        // pivot^2 = lambda + sigma_{t-1}^2(x), so the gain increment
        // 0.5 ln(1 + sigma^2/lambda) is ln(pivot) - 0.5 ln(lambda).
        self.gain += pivot.ln() - 0.5 * self.lambda.ln();

        let row = self.factor.row(t);
        let dot: f64 = row[..t]
            .iter()
            .zip(self.half_weights.iter())
            .map(|(a, b)| a * b)
            .sum();
        let hw = (y - dot) / pivot;
        self.half_weights.push(hw);
        self.points.push(x.to_vec());
        self.targets.push(y);

        if let Some(mut cache) = self.cache.take() {
            let kx = self.cross_row(&cache.domain, t)?;
            Self::push_cache_row(&mut cache, &self.factor, t, kx, hw);
            self.cache = Some(cache);
        }
        Ok(())
    }

    /// Posterior mean at `x` (zero before any observation).
    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        let v = self.solved_cross(x)?;
        Ok(v.iter()
            .zip(self.half_weights.iter())
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Posterior standard deviation at `x` (prior value before any
    /// observation). Fails with a degeneracy error if the variance falls
    /// below `-1e-10`.
    pub fn posterior_std(&self, x: &[f64]) -> Result<f64> {
        let prior = self.kernel.evaluate(x, x)?;
        let v = self.solved_cross(x)?;
        let sq: f64 = v.iter().map(|a| a * a).sum();
        checked_std(prior - sq)
    }

    /// Posterior mean and standard deviation at every point of `domain`.
    /// O(1) per point on the tracked domain, O(t^2) per point otherwise.
    pub fn posterior_table(&self, domain: &Domain) -> Result<(Vec<f64>, Vec<f64>)> {
        if let Some(cache) = &self.cache {
            if cache.domain == *domain {
                let stds = cache
                    .var
                    .iter()
                    .map(|&v| checked_std(v))
                    .collect::<Result<Vec<_>>>()?;
                return Ok((cache.mean.clone(), stds));
            }
        }
        let mut means = Vec::with_capacity(domain.len());
        let mut stds = Vec::with_capacity(domain.len());
        for j in 0..domain.len() {
            means.push(self.posterior_mean(domain.point(j))?);
            stds.push(self.posterior_std(domain.point(j))?);
        }
        Ok((means, stds))
    }

    /// One joint draw from the posterior over `points`, with the covariance
    /// scaled by `scale^2`: `mu + scale * L z`, `z` standard normal, where
    /// `L` factors the (jittered) posterior covariance. Directions whose
    /// pivot falls below an internal drop tolerance receive no noise, so
    /// duplicated query points come back (numerically) identical and
    /// `scale = 0` returns the mean vector exactly.
    pub fn posterior_joint_sample<R: Rng + ?Sized>(
        &self,
        points: &[Vec<f64>],
        scale: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if points.is_empty() {
            return Err(Error::InvalidInput("joint sample needs at least one query point".into()));
        }
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "joint sample scale must be non-negative and finite, got {scale}"
            )));
        }
        let m = points.len();
        let (mean, mut cov) = match self.cached_joint(points)? {
            Some(pair) => pair,
            None => {
                let mut mean = Vec::with_capacity(m);
                let mut solved = Vec::with_capacity(m);
                for p in points {
                    mean.push(self.posterior_mean(p)?);
                    solved.push(self.solved_cross(p)?);
                }
                let mut cov = self.kernel.gram(points)?;
                for i in 0..m {
                    for j in 0..=i {
                        let d: f64 = solved[i]
                            .iter()
                            .zip(solved[j].iter())
                            .map(|(a, b)| a * b)
                            .sum();
                        cov[(i, j)] -= d;
                        cov[(j, i)] = cov[(i, j)];
                    }
                }
                (mean, cov)
            }
        };
        for i in 0..m {
            cov[(i, i)] += SAMPLE_JITTER;
        }
        let l = semidefinite_factor(&cov, SAMPLE_DROP_TOL);
        let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let mut sample = mean;
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += l[(i, j)] * z[j];
            }
            sample[i] += scale * acc;
        }
        Ok(sample)
    }

    /// Mean vector and posterior covariance from the tracked cache when the
    /// query is exactly the tracked domain and covariance tracking is on.
    fn cached_joint(&self, points: &[Vec<f64>]) -> Result<Option<(Vec<f64>, DMatrix<f64>)>> {
        let Some(cache) = &self.cache else {
            return Ok(None);
        };
        let Some(cov) = &cache.cov else {
            return Ok(None);
        };
        if cache.domain.points() != points {
            return Ok(None);
        }
        Ok(Some((cache.mean.clone(), cov.clone())))
    }

    /// `L^-1 k_t(x)`.
    fn solved_cross(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(self.points.len());
        for p in &self.points {
            v.push(self.kernel.evaluate(x, p)?);
        }
        self.factor.solve_lower(&mut v);
        Ok(v)
    }

    /// Kernel row of observation `t` against every domain point.
    fn cross_row(&self, domain: &Domain, t: usize) -> Result<Vec<f64>> {
        let x = &self.points[t];
        (0..domain.len())
            .map(|j| self.kernel.evaluate(x, domain.point(j)))
            .collect()
    }

    /// Appends the solved cross-covariance row for observation `t` to the
    /// cache and folds it into the running mean / variance / covariance.
    fn push_cache_row(
        cache: &mut DomainCache,
        factor: &PackedLower,
        t: usize,
        mut kx: Vec<f64>,
        half_weight: f64,
    ) {
        let n = cache.domain.len();
        debug_assert_eq!(kx.len(), n);
        let lrow = factor.row(t);
        let pivot = lrow[t];
        for (s, &l) in lrow[..t].iter().enumerate() {
            let prev = &cache.rows[s * n..(s + 1) * n];
            for (k, p) in kx.iter_mut().zip(prev.iter()) {
                *k -= l * p;
            }
        }
        for k in kx.iter_mut() {
            *k /= pivot;
        }
        for j in 0..n {
            cache.mean[j] += kx[j] * half_weight;
            cache.var[j] -= kx[j] * kx[j];
        }
        if let Some(cov) = &mut cache.cov {
            for i in 0..n {
                for j in 0..n {
                    cov[(i, j)] -= kx[i] * kx[j];
                }
            }
        }
        cache.rows.extend_from_slice(&kx);
    }
}

fn checked_std(var: f64) -> Result<f64> {
    if var < -VAR_TOL {
        return Err(Error::Degeneracy {
            context: "posterior variance below the roundoff tolerance",
            value: var,
        });
    }
    Ok(var.max(0.0).sqrt())
}
