//! Regret and constraint-violation metrics for completed runs.
//!
//! All quantities are computed from the *true* means of the played actions
//! (noise-free), as recorded in [`RunRecord::true_reward`] /
//! [`RunRecord::true_cost`]:
//!
//! * positive regret `R+(t) = max(0, t * opt - sum_{s<=t} f(x_s))` against a
//!   fixed benchmark value `opt`,
//! * violation `V(t) = max(0, sum_{s<=t} g(x_s))` — cumulative constraint
//!   debt, where underspending earlier rounds can pay for later excess,
//! * strong violation `SV(t) = sum_{s<=t} max(0, g(x_s))` — no such
//!   cancellation,
//! * the count `N(t)` of individually violating rounds (`g(x_s) > 0`).
//!
//! [`aggregate`] averages these curves across independent trials and attaches
//! standard errors (sample standard deviation over sqrt of the trial count).

use crate::error::{Error, Result};
use crate::record::RunRecord;

/// Positive cumulative regret after each round against benchmark `opt_value`.
pub fn regret_plus(records: &[RunRecord], opt_value: f64) -> Vec<f64> {
    let mut cum = 0.0;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            cum += r.true_reward;
            ((i + 1) as f64 * opt_value - cum).max(0.0)
        })
        .collect()
}

/// Per-round violation curves of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationSeries {
    /// `max(0, cumulative cost)` after each round.
    pub violation: Vec<f64>,
    /// Cumulative positive part of the per-round cost.
    pub strong: Vec<f64>,
    /// Running count of rounds with strictly positive cost.
    pub violated_rounds: Vec<usize>,
}

/// Computes all violation curves in one pass.
pub fn violation_metrics(records: &[RunRecord]) -> ViolationSeries {
    let mut cum = 0.0;
    let mut strong_cum = 0.0;
    let mut count = 0usize;
    let mut violation = Vec::with_capacity(records.len());
    let mut strong = Vec::with_capacity(records.len());
    let mut violated_rounds = Vec::with_capacity(records.len());
    for r in records {
        cum += r.true_cost;
        strong_cum += r.true_cost.max(0.0);
        if r.true_cost > 0.0 {
            count += 1;
        }
        violation.push(cum.max(0.0));
        strong.push(strong_cum);
        violated_rounds.push(count);
    }
    ViolationSeries {
        violation,
        strong,
        violated_rounds,
    }
}

/// All metric curves of a single trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub regret_plus: Vec<f64>,
    pub violation: Vec<f64>,
    pub strong_violation: Vec<f64>,
    pub violated_rounds: Vec<usize>,
}

impl TrialMetrics {
    pub fn from_records(records: &[RunRecord], opt_value: f64) -> Self {
        let v = violation_metrics(records);
        Self {
            regret_plus: regret_plus(records, opt_value),
            violation: v.violation,
            strong_violation: v.strong,
            violated_rounds: v.violated_rounds,
        }
    }
}

/// Per-round mean and standard error across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

fn series_stats(rows: &[&[f64]]) -> SeriesStats {
    let n = rows.len();
    let horizon = rows[0].len();
    let mut mean = vec![0.0; horizon];
    let mut se = vec![0.0; horizon];
    for t in 0..horizon {
        let m = rows.iter().map(|r| r[t]).sum::<f64>() / n as f64;
        mean[t] = m;
        if n > 1 {
            let var = rows.iter().map(|r| (r[t] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            se[t] = (var / n as f64).sqrt();
        }
    }
    SeriesStats { mean, se }
}

/// Trial-averaged metric curves with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub horizon: usize,
    pub trials: usize,
    pub regret_plus: SeriesStats,
    pub violation: SeriesStats,
    pub strong_violation: SeriesStats,
    pub violated_rounds_mean: Vec<f64>,
}

/// Averages metric curves over trials of equal horizon.
pub fn aggregate(trials: &[TrialMetrics]) -> Result<MetricSeries> {
    if trials.is_empty() {
        return Err(Error::InvalidInput("no trials to aggregate".into()));
    }
    let horizon = trials[0].regret_plus.len();
    for t in trials {
        if [
            t.regret_plus.len(),
            t.violation.len(),
            t.strong_violation.len(),
            t.violated_rounds.len(),
        ]
        .iter()
        .any(|&l| l != horizon)
        {
            return Err(Error::DimensionMismatch {
                expected: horizon,
                got: t.regret_plus.len(),
            });
        }
    }
    let collect = |f: fn(&TrialMetrics) -> &[f64]| -> SeriesStats {
        let rows: Vec<&[f64]> = trials.iter().map(f).collect();
        series_stats(&rows)
    };
    let counts: Vec<Vec<f64>> = trials
        .iter()
        .map(|t| t.violated_rounds.iter().map(|&c| c as f64).collect())
        .collect();
    let violated_rounds_mean = series_stats(&counts.iter().map(Vec::as_slice).collect::<Vec<_>>())
        .mean;
    Ok(MetricSeries {
        horizon,
        trials: trials.len(),
        regret_plus: collect(|t| &t.regret_plus),
        violation: collect(|t| &t.violation),
        strong_violation: collect(|t| &t.strong_violation),
        violated_rounds_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn records_from(true_rewards: &[f64], true_costs: &[f64]) -> Vec<RunRecord> {
        true_rewards
            .iter()
            .zip(true_costs)
            .enumerate()
            .map(|(i, (&f, &g))| RunRecord {
                round: i + 1,
                action: 0,
                reward: f,
                cost: g,
                true_reward: f,
                true_cost: g,
                dual: 0.0,
            })
            .collect()
    }

    #[test]
    fn regret_accumulates_shortfall_against_benchmark() {
        let recs = records_from(&[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(regret_plus(&recs, 0.5), vec![0.5, 1.0]);
    }

    #[test]
    fn regret_clamps_when_play_beats_benchmark() {
        let recs = records_from(&[1.0, 0.0, 0.2], &[0.0; 3]);
        let r = regret_plus(&recs, 0.5);
        assert_eq!(r[0], 0.0); // ahead of benchmark
        assert_eq!(r[1], 0.0); // 1.0 played vs 1.0 target
        assert_abs_diff_eq!(r[2], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn violation_allows_cancellation_but_strong_does_not() {
        let recs = records_from(&[0.0, 0.0], &[-1.0, 0.5]);
        let v = violation_metrics(&recs);
        assert_eq!(v.violation, vec![0.0, 0.0]);
        assert_eq!(v.strong, vec![0.0, 0.5]);
        assert_eq!(v.violated_rounds, vec![0, 1]);
    }

    #[test]
    fn violation_tracks_positive_debt() {
        let recs = records_from(&[0.0; 4], &[0.5, 0.25, -1.0, 0.5]);
        let v = violation_metrics(&recs);
        assert_eq!(v.violation, vec![0.5, 0.75, 0.0, 0.25]);
        assert_eq!(v.strong, vec![0.5, 0.75, 0.75, 1.25]);
        assert_eq!(v.violated_rounds, vec![1, 2, 2, 3]);
    }

    #[test]
    fn aggregate_means_and_standard_errors() {
        let a = TrialMetrics::from_records(&records_from(&[0.0, 0.0], &[1.0, 1.0]), 0.5);
        let b = TrialMetrics::from_records(&records_from(&[0.5, 0.5], &[0.0, 0.0]), 0.5);
        let agg = aggregate(&[a, b]).unwrap();
        assert_eq!(agg.horizon, 2);
        assert_eq!(agg.trials, 2);
        // Trial regrets: [0.5, 1.0] and [0.0, 0.0].
        assert_eq!(agg.regret_plus.mean, vec![0.25, 0.5]);
        // Sample std of {0.5, 0.0} is 0.5/sqrt(2); SE divides by sqrt(2) again.
        assert_abs_diff_eq!(agg.regret_plus.se[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(agg.regret_plus.se[1], 0.5, epsilon = 1e-15);
        assert_eq!(agg.violation.mean, vec![0.5, 1.0]);
        assert_eq!(agg.violated_rounds_mean, vec![0.5, 1.0]);
    }

    #[test]
    fn single_trial_has_zero_standard_error() {
        let a = TrialMetrics::from_records(&records_from(&[0.1, 0.2], &[0.3, -0.1]), 0.5);
        let agg = aggregate(&[a]).unwrap();
        assert!(agg.regret_plus.se.iter().all(|&s| s == 0.0));
        assert!(agg.violation.se.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn aggregate_rejects_empty_and_ragged_input() {
        assert!(aggregate(&[]).is_err());
        let a = TrialMetrics::from_records(&records_from(&[0.0], &[0.0]), 0.5);
        let b = TrialMetrics::from_records(&records_from(&[0.0, 0.0], &[0.0, 0.0]), 0.5);
        assert!(aggregate(&[a, b]).is_err());
    }
}
