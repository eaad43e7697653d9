//! Evaluation machinery: leave-one-out cross-validation, the four regression
//! metrics, the paired sign-flip permutation test, and the comparison
//! decision rule.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::seeding::rng_for;

/// Pair count at or below which the permutation test enumerates every sign
/// assignment (2^n <= 2^20) instead of sampling.
const EXHAUSTIVE_MAX_PAIRS: usize = 20;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} samples, have {have}")]
    TooFewSamples { needed: usize, have: usize },
    #[error("actual values are constant; R^2 is undefined")]
    ConstantTarget,
    #[error("fold {fold} failed: {message}")]
    FoldFailed { fold: usize, message: String },
}

/// The four metric values plus wall-clock time for one algorithm run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSet {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub r2: f64,
    pub et_seconds: f64,
}

impl MetricSet {
    /// Computes all four metrics from actual/predicted vectors. `r2` is NaN
    /// when the actuals are constant.
    pub fn from_predictions(
        actual: &[f64],
        predicted: &[f64],
        et_seconds: f64,
    ) -> Result<Self, EvalError> {
        Ok(Self {
            mae: mae(actual, predicted)?,
            mse: mse(actual, predicted)?,
            rmse: rmse(actual, predicted)?,
            r2: match r_squared(actual, predicted) {
                Ok(v) => v,
                Err(EvalError::ConstantTarget) => f64::NAN,
                Err(e) => return Err(e),
            },
            et_seconds,
        })
    }
}

/// Outcome of the paired two-tailed permutation test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PermTestResult {
    /// Observed statistic `mean(err_a) - mean(err_b)`.
    pub dif_obs: f64,
    pub p_value: f64,
    /// Number of permutations realized (2^n when exhaustive).
    pub n_perms: u64,
    pub exhaustive: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    ABetter,
    BBetter,
    Similar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EtPreference {
    A,
    B,
}

/// Comparison verdict between two algorithms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub significant: bool,
    /// Lower-ET side, set only when the decision is `Similar`.
    pub et_preference: Option<EtPreference>,
}

fn check_pair(actual: &[f64], predicted: &[f64]) -> Result<(), EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(EvalError::TooFewSamples { needed: 1, have: 0 });
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_pair(actual, predicted)?;
    let mut acc = 0.0;
    for (a, p) in actual.iter().zip(predicted) {
        acc += (a - p).abs();
    }
    Ok(acc / actual.len() as f64)
}

/// Mean squared error.
pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_pair(actual, predicted)?;
    let mut acc = 0.0;
    for (a, p) in actual.iter().zip(predicted) {
        let d = a - p;
        acc += d * d;
    }
    Ok(acc / actual.len() as f64)
}

/// Root mean squared error.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    Ok(mse(actual, predicted)?.sqrt())
}

/// Coefficient of determination `1 - SS_res / SS_tot`. Negative when the
/// predictor does worse than the mean.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_pair(actual, predicted)?;
    if actual.len() < 2 {
        return Err(EvalError::TooFewSamples {
            needed: 2,
            have: actual.len(),
        });
    }
    let mut sum = 0.0;
    for a in actual {
        sum += a;
    }
    let mean = sum / actual.len() as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (a, p) in actual.iter().zip(predicted) {
        let r = a - p;
        ss_res += r * r;
        let t = a - mean;
        ss_tot += t * t;
    }
    if ss_tot == 0.0 {
        return Err(EvalError::ConstantTarget);
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Leave-one-out cross-validation of a fit-predict procedure.
///
/// For each row, trains on all other rows and predicts the held-out one; no
/// state carries between folds. Folds run in parallel. Returns `(actuals,
/// predictions)` in row order.
pub fn loocv<F, E>(dataset: &Dataset, fit_predict: F) -> Result<(Vec<f64>, Vec<f64>), EvalError>
where
    F: Fn(&[Vec<f64>], &[f64], &[f64]) -> Result<f64, E> + Sync,
    E: std::fmt::Display,
{
    let n = dataset.y.len();
    if n < 2 {
        return Err(EvalError::TooFewSamples { needed: 2, have: n });
    }
    let outcomes: Vec<Result<f64, EvalError>> = (0..n)
        .into_par_iter()
        .map(|fold| {
            let mut train_x = Vec::with_capacity(n - 1);
            let mut train_y = Vec::with_capacity(n - 1);
            for (i, (row, y)) in dataset.x.iter().zip(&dataset.y).enumerate() {
                if i != fold {
                    train_x.push(row.clone());
                    train_y.push(*y);
                }
            }
            fit_predict(&train_x, &train_y, &dataset.x[fold]).map_err(|e| EvalError::FoldFailed {
                fold,
                message: e.to_string(),
            })
        })
        .collect();
    let mut predictions = Vec::with_capacity(n);
    for outcome in outcomes {
        predictions.push(outcome?);
    }
    Ok((dataset.y.clone(), predictions))
}

/// Two-tailed paired permutation test on per-instance absolute errors.
///
/// The statistic is the MAE difference `mean(err_a) - mean(err_b)`; the null
/// distribution swaps each pair independently (a sign flip of the
/// difference). All 2^n assignments are enumerated when n <= 20; otherwise
/// `n_perm` Monte Carlo draws are taken from a counter-based stream keyed by
/// `seed`, with add-one smoothing so p is never zero.
pub fn permutation_test(
    err_a: &[f64],
    err_b: &[f64],
    n_perm: u64,
    seed: u64,
) -> Result<PermTestResult, EvalError> {
    check_pair(err_a, err_b)?;
    if err_a.len() <= EXHAUSTIVE_MAX_PAIRS {
        Ok(exhaustive_test(err_a, err_b, seed))
    } else {
        Ok(monte_carlo_test(err_a, err_b, n_perm, seed))
    }
}

/// Monte Carlo estimator regardless of pair count; used to cross-check the
/// sampled p against the exhaustive one on small inputs.
pub fn permutation_test_monte_carlo(
    err_a: &[f64],
    err_b: &[f64],
    n_perm: u64,
    seed: u64,
) -> Result<PermTestResult, EvalError> {
    check_pair(err_a, err_b)?;
    Ok(monte_carlo_test(err_a, err_b, n_perm, seed))
}

struct PairStats {
    dif_obs: f64,
    diffs: Vec<f64>,
}

fn pair_stats(err_a: &[f64], err_b: &[f64]) -> PairStats {
    let n = err_a.len();
    let mut sum_a = 0.0;
    let mut sum_b = 0.0;
    for (a, b) in err_a.iter().zip(err_b) {
        sum_a += a;
        sum_b += b;
    }
    PairStats {
        dif_obs: sum_a / n as f64 - sum_b / n as f64,
        diffs: err_a.iter().zip(err_b).map(|(a, b)| a - b).collect(),
    }
}

fn exhaustive_test(err_a: &[f64], err_b: &[f64], seed: u64) -> PermTestResult {
    let n = err_a.len();
    let stats = pair_stats(err_a, err_b);
    let threshold = stats.dif_obs.abs();
    let total: u64 = 1 << n;
    let mut extreme = 0u64;
    for mask in 0..total {
        let mut acc = 0.0;
        for (i, d) in stats.diffs.iter().enumerate() {
            if mask >> i & 1 == 1 {
                acc -= d;
            } else {
                acc += d;
            }
        }
        if (acc / n as f64).abs() >= threshold {
            extreme += 1;
        }
    }
    PermTestResult {
        dif_obs: stats.dif_obs,
        p_value: extreme as f64 / total as f64,
        n_perms: total,
        exhaustive: true,
        seed,
    }
}

fn monte_carlo_test(err_a: &[f64], err_b: &[f64], n_perm: u64, seed: u64) -> PermTestResult {
    let n = err_a.len();
    let stats = pair_stats(err_a, err_b);
    let threshold = stats.dif_obs.abs();
    let mut extreme = 0u64;
    for t in 0..n_perm {
        let mut rng = rng_for(seed, &format!("perm/{t}"));
        let mut acc = 0.0;
        for d in &stats.diffs {
            if rng.random::<bool>() {
                acc -= d;
            } else {
                acc += d;
            }
        }
        if (acc / n as f64).abs() >= threshold {
            extreme += 1;
        }
    }
    PermTestResult {
        dif_obs: stats.dif_obs,
        p_value: (1 + extreme) as f64 / (1 + n_perm) as f64,
        n_perms: n_perm,
        exhaustive: false,
        seed,
    }
}

/// The comparison rule: MAE plus its permutation test decide; when the
/// difference is not significant the faster algorithm is preferred.
pub fn decision_rule(
    report_a: &MetricSet,
    report_b: &MetricSet,
    perm: &PermTestResult,
    p_threshold: f64,
) -> Verdict {
    let significant = perm.p_value < p_threshold;
    let decision = if significant && perm.dif_obs < 0.0 {
        Decision::ABetter
    } else if significant && perm.dif_obs > 0.0 {
        Decision::BBetter
    } else {
        Decision::Similar
    };
    let et_preference = if decision == Decision::Similar {
        if report_a.et_seconds < report_b.et_seconds {
            Some(EtPreference::A)
        } else if report_b.et_seconds < report_a.et_seconds {
            Some(EtPreference::B)
        } else {
            None
        }
    } else {
        None
    };
    Verdict {
        decision,
        significant,
        et_preference,
    }
}
