//! The hybrid regressor: one equal-share linear model per training instance,
//! an adaptively sized Manhattan neighborhood, and an alpha-blend of the
//! neighborhood's model predictions with its plain regressand average.
//!
//! Prediction of a test vector `x` works in three steps:
//!
//! 1. find the nearest training row by Manhattan distance (`dist_min`);
//! 2. admit every row within `delta * dist_min`;
//! 3. average the admitted rows' per-instance model predictions (the
//!    first component) and their stored regressands (the second), then
//!    blend the components as `alpha * first + (1 - alpha) * second`.
//!
//! [`grid_search_loocv`] scans `(delta, alpha)` pairs under leave-one-out
//! cross-validation and keeps the pair minimizing MAE, ties resolving to the
//! largest delta then largest alpha. The scan caches per-instance
//! coefficients and pairwise distances (both are fold-independent), but every
//! cached value is produced by the same arithmetic as a from-scratch fold
//! rebuild, so results match a no-cache recomputation bit for bit.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ama::{fit_instance, reconstruct, AmaError};
use crate::data::Dataset;
use crate::eval::{mae, mse, r_squared, rmse, EvalError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model has no training rows")]
    EmptyModel,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("training row {row} has all-zero regressors with a nonzero regressand")]
    DegenerateRow { row: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperParams(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("need at least 2 rows, have {have}")]
    TooFewRows { have: usize },
}

/// Per-training-instance coefficient rows plus the stored training data.
#[derive(Debug, Clone)]
pub struct AmrModel {
    /// One coefficient row per training instance.
    pub coefficients: Vec<Vec<f64>>,
    /// Training regressor rows, stored verbatim.
    pub regressors: Vec<Vec<f64>>,
    /// Training regressand values, stored verbatim.
    pub regressands: Vec<f64>,
}

impl AmrModel {
    pub fn len(&self) -> usize {
        self.regressands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regressands.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.regressors.first().map_or(0, Vec::len)
    }
}

/// Blend weight and neighborhood width. `beta` is always `1 - alpha`.
#[derive(Debug, Clone, Copy)]
pub struct HyperParams {
    alpha: f64,
    beta: f64,
    delta: f64,
}

impl HyperParams {
    /// Requires `alpha` in `(0, 1]` and `delta` in `[1, 10]`.
    pub fn new(alpha: f64, delta: f64) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(ModelError::InvalidHyperParams(format!(
                "alpha must be in (0, 1], got {alpha}"
            )));
        }
        if !(1.0..=10.0).contains(&delta) {
            return Err(ModelError::InvalidHyperParams(format!(
                "delta must be in [1, 10], got {delta}"
            )));
        }
        Ok(Self {
            alpha,
            beta: 1.0 - alpha,
            delta,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// How neighborhood components are aggregated. `Mean` divides both component
/// sums by the neighbor count; `Sum` keeps the raw accumulator values, which
/// makes predictions scale with the neighbor count and exists only as a
/// diagnostic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Mean,
    Sum,
}

/// Everything a single prediction produced.
#[derive(Debug, Clone)]
pub struct PredictionTrace {
    pub y_hat: f64,
    pub y_hat_ama: f64,
    pub y_hat_knn: f64,
    /// Neighbors admitted.
    pub k: usize,
    /// Nearest-neighbor Manhattan distance.
    pub dist_min: f64,
}

/// Optimal grid point and its metric values.
///
/// `k_op` is the rounded mean neighbor count across folds at the optimum;
/// the raw last-fold count is kept in `k_last_fold` as a diagnostic and is
/// not serialized. `r2_op` is NaN (serialized as null) when the regressand
/// is constant.
#[derive(Debug, Clone, Serialize)]
pub struct GridSearchResult {
    pub mae_op: f64,
    pub mse_op: f64,
    pub rmse_op: f64,
    pub r2_op: f64,
    pub alpha_op: f64,
    pub beta_op: f64,
    pub delta_op: f64,
    pub k_op: usize,
    pub et_seconds: f64,
    #[serde(skip)]
    pub k_last_fold: usize,
}

/// Grid-search outcome plus the per-fold predictions at the optimum.
#[derive(Debug, Clone)]
pub struct GridEvaluation {
    pub result: GridSearchResult,
    pub predictions: Vec<f64>,
    pub neighbor_counts: Vec<usize>,
}

/// Builds one coefficient row per training instance; regressors and
/// regressands are stored verbatim.
pub fn build_model(x_tr: &[Vec<f64>], y_tr: &[f64]) -> Result<AmrModel, ModelError> {
    if x_tr.len() != y_tr.len() {
        return Err(ModelError::LengthMismatch {
            left: x_tr.len(),
            right: y_tr.len(),
        });
    }
    if x_tr.is_empty() {
        return Err(ModelError::EmptyModel);
    }
    let mut coefficients = Vec::with_capacity(x_tr.len());
    for (row, (x, y)) in x_tr.iter().zip(y_tr).enumerate() {
        let decomposition = fit_instance(x, *y).map_err(|e| match e {
            AmaError::DegenerateInstance { .. } | AmaError::EmptyVector => {
                ModelError::DegenerateRow { row }
            }
            AmaError::LengthMismatch { left, right } => ModelError::LengthMismatch { left, right },
            AmaError::InvalidCheckpoints => unreachable!("fit_instance cannot report checkpoints"),
        })?;
        coefficients.push(decomposition.a);
    }
    Ok(AmrModel {
        coefficients,
        regressors: x_tr.to_vec(),
        regressands: y_tr.to_vec(),
    })
}

/// City-block distance `sum(|u_i - v_i|)`.
pub fn manhattan_distance(u: &[f64], v: &[f64]) -> Result<f64, ModelError> {
    if u.len() != v.len() {
        return Err(ModelError::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let mut acc = 0.0;
    for (a, b) in u.iter().zip(v) {
        acc += (a - b).abs();
    }
    Ok(acc)
}

/// All training rows within `delta` times the nearest Manhattan distance.
///
/// The threshold is inclusive, so the nearest row always qualifies and the
/// result is nonempty. Returns the admitted row indices (ascending) and the
/// nearest distance.
pub fn select_neighbors(
    model: &AmrModel,
    x_te: &[f64],
    delta: f64,
) -> Result<(Vec<usize>, f64), ModelError> {
    if model.is_empty() {
        return Err(ModelError::EmptyModel);
    }
    if delta < 1.0 {
        return Err(ModelError::InvalidHyperParams(format!(
            "delta must be at least 1, got {delta}"
        )));
    }
    let mut dists = Vec::with_capacity(model.len());
    for row in &model.regressors {
        dists.push(manhattan_distance(x_te, row)?);
    }
    let mut dist_min = f64::INFINITY;
    for &d in &dists {
        if d < dist_min {
            dist_min = d;
        }
    }
    let threshold = delta * dist_min;
    let indices: Vec<usize> = dists
        .iter()
        .enumerate()
        .filter(|(_, d)| **d <= threshold)
        .map(|(q, _)| q)
        .collect();
    Ok((indices, dist_min))
}

/// Blended prediction for one test vector.
pub fn predict(
    model: &AmrModel,
    x_te: &[f64],
    params: &HyperParams,
) -> Result<PredictionTrace, ModelError> {
    predict_with(model, x_te, params, Aggregation::Mean)
}

/// [`predict`] with an explicit aggregation mode.
pub fn predict_with(
    model: &AmrModel,
    x_te: &[f64],
    params: &HyperParams,
    aggregation: Aggregation,
) -> Result<PredictionTrace, ModelError> {
    if x_te.len() != model.n_features() {
        return Err(ModelError::LengthMismatch {
            left: x_te.len(),
            right: model.n_features(),
        });
    }
    let (indices, dist_min) = select_neighbors(model, x_te, params.delta)?;
    let mut sum_ama = 0.0;
    let mut sum_knn = 0.0;
    for &q in &indices {
        sum_ama += reconstruct(&model.coefficients[q], x_te)
            .expect("model rows match the test vector length");
        sum_knn += model.regressands[q];
    }
    let k = indices.len();
    let (y_hat_ama, y_hat_knn) = match aggregation {
        Aggregation::Mean => (sum_ama / k as f64, sum_knn / k as f64),
        Aggregation::Sum => (sum_ama, sum_knn),
    };
    Ok(PredictionTrace {
        y_hat: params.alpha * y_hat_ama + params.beta * y_hat_knn,
        y_hat_ama,
        y_hat_knn,
        k,
        dist_min,
    })
}

/// The default blend grid `0.1, 0.2, ..., 1.0`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

/// The default neighborhood grid `1.0, 1.1, ..., 10.0`.
pub fn default_delta_grid() -> Vec<f64> {
    (10..=100).map(|i| i as f64 / 10.0).collect()
}

/// Scans `(delta, alpha)` pairs under LOOCV and returns the MAE-optimal
/// point, ties resolving to the largest delta then largest alpha.
pub fn grid_search_loocv(
    dataset: &Dataset,
    alpha_grid: &[f64],
    delta_grid: &[f64],
) -> Result<GridSearchResult, ModelError> {
    Ok(grid_search_loocv_full(dataset, alpha_grid, delta_grid, Aggregation::Mean)?.result)
}

/// [`grid_search_loocv`] returning the per-fold predictions and neighbor
/// counts at the optimum as well.
pub fn grid_search_loocv_full(
    dataset: &Dataset,
    alpha_grid: &[f64],
    delta_grid: &[f64],
    aggregation: Aggregation,
) -> Result<GridEvaluation, ModelError> {
    let n = dataset.n_rows();
    if n < 2 {
        return Err(ModelError::TooFewRows { have: n });
    }
    if alpha_grid.is_empty() || delta_grid.is_empty() {
        return Err(ModelError::InvalidGrid(
            "grids must be nonempty".to_string(),
        ));
    }
    if let Some(alpha) = alpha_grid.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(ModelError::InvalidGrid(format!(
            "alpha {alpha} outside (0, 1]"
        )));
    }
    if let Some(delta) = delta_grid.iter().find(|d| !(1.0..=10.0).contains(*d)) {
        return Err(ModelError::InvalidGrid(format!(
            "delta {delta} outside [1, 10]"
        )));
    }

    let start = Instant::now();

    // A row's coefficients depend on that row alone, so the per-fold model
    // rows coincide with these regardless of which row is held out.
    let fits: Vec<Result<Vec<f64>, ModelError>> = (0..n)
        .into_par_iter()
        .map(|q| {
            fit_instance(&dataset.x[q], dataset.y[q])
                .map(|d| d.a)
                .map_err(|_| ModelError::DegenerateRow { row: q })
        })
        .collect();
    let mut coefficients = Vec::with_capacity(n);
    for fit in fits {
        coefficients.push(fit?);
    }

    // pred_at[l][q]: model row q evaluated on test row l; dist[l][q]: the
    // Manhattan distance between them. Both are fold-independent.
    let pred_at: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|l| {
            (0..n)
                .map(|q| reconstruct(&coefficients[q], &dataset.x[l]).expect("rectangular dataset"))
                .collect()
        })
        .collect();
    let dist: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|l| {
            (0..n)
                .map(|q| manhattan_distance(&dataset.x[l], &dataset.x[q]).expect("rectangular"))
                .collect()
        })
        .collect();
    let dist_min: Vec<f64> = (0..n)
        .map(|l| {
            let mut best = f64::INFINITY;
            for (q, d) in dist[l].iter().enumerate() {
                if q != l && *d < best {
                    best = *d;
                }
            }
            best
        })
        .collect();

    let fold_stats_for = |delta: f64| -> Vec<(f64, f64, usize)> {
        (0..n)
            .map(|l| {
                let threshold = delta * dist_min[l];
                let mut sum_ama = 0.0;
                let mut sum_knn = 0.0;
                let mut k = 0usize;
                for q in 0..n {
                    if q != l && dist[l][q] <= threshold {
                        sum_ama += pred_at[l][q];
                        sum_knn += dataset.y[q];
                        k += 1;
                    }
                }
                (sum_ama, sum_knn, k)
            })
            .collect()
    };
    let blend = |alpha: f64, beta: f64, stats: &(f64, f64, usize)| -> f64 {
        let (sum_ama, sum_knn, k) = *stats;
        let (ama, knn) = match aggregation {
            Aggregation::Mean => (sum_ama / k as f64, sum_knn / k as f64),
            Aggregation::Sum => (sum_ama, sum_knn),
        };
        alpha * ama + beta * knn
    };

    // MAE for every grid point, delta-major.
    let maes: Vec<Vec<f64>> = delta_grid
        .par_iter()
        .map(|&delta| {
            let stats = fold_stats_for(delta);
            alpha_grid
                .iter()
                .map(|&alpha| {
                    let beta = 1.0 - alpha;
                    let mut acc = 0.0;
                    for (l, s) in stats.iter().enumerate() {
                        acc += (dataset.y[l] - blend(alpha, beta, s)).abs();
                    }
                    acc / n as f64
                })
                .collect()
        })
        .collect();

    // Sequential last-wins scan: a later point replaces the optimum whenever
    // its MAE is less than or equal, so ties resolve to the largest delta,
    // then the largest alpha.
    let mut best_mae = f64::INFINITY;
    let mut best = (0usize, 0usize);
    for (di, row) in maes.iter().enumerate() {
        for (ai, &m) in row.iter().enumerate() {
            if m <= best_mae {
                best_mae = m;
                best = (di, ai);
            }
        }
    }
    let (di, ai) = best;
    let delta_op = delta_grid[di];
    let alpha_op = alpha_grid[ai];
    let beta_op = 1.0 - alpha_op;

    let stats = fold_stats_for(delta_op);
    let predictions: Vec<f64> = stats.iter().map(|s| blend(alpha_op, beta_op, s)).collect();
    let neighbor_counts: Vec<usize> = stats.iter().map(|s| s.2).collect();

    let mae_op = mae(&dataset.y, &predictions).expect("nonempty predictions");
    let mse_op = mse(&dataset.y, &predictions).expect("nonempty predictions");
    let rmse_op = rmse(&dataset.y, &predictions).expect("nonempty predictions");
    let r2_op = match r_squared(&dataset.y, &predictions) {
        Ok(v) => v,
        Err(EvalError::ConstantTarget) => f64::NAN,
        Err(e) => unreachable!("r_squared failed unexpectedly: {e}"),
    };
    let mean_k = neighbor_counts.iter().sum::<usize>() as f64 / n as f64;

    Ok(GridEvaluation {
        result: GridSearchResult {
            mae_op,
            mse_op,
            rmse_op,
            r2_op,
            alpha_op,
            beta_op,
            delta_op,
            k_op: mean_k.round() as usize,
            et_seconds: start.elapsed().as_secs_f64(),
            k_last_fold: neighbor_counts[n - 1],
        },
        predictions,
        neighbor_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_for;
    use rand::Rng;

    fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        Dataset {
            feature_names: (0..x[0].len()).map(|i| format!("f{i}")).collect(),
            name: "test".into(),
            x,
            y,
        }
    }

    #[test]
    fn build_model_examples() {
        let m = build_model(&[vec![2.0, 4.0]], &[8.0]).unwrap();
        assert_eq!(m.coefficients, vec![vec![2.0, 1.0]]);

        let m = build_model(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[0.0, 0.0]).unwrap();
        assert_eq!(m.coefficients, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);

        let m = build_model(&[vec![1.0]], &[5.0]).unwrap();
        assert_eq!(m.coefficients, vec![vec![5.0]]);
    }

    #[test]
    fn build_model_reports_degenerate_row() {
        let err = build_model(&[vec![1.0, 2.0], vec![0.0, 0.0]], &[3.0, 1.0]).unwrap_err();
        assert!(matches!(err, ModelError::DegenerateRow { row: 1 }));
    }

    #[test]
    fn model_reconstruction_is_self_consistent() {
        let mut rng = rng_for(41, "model-test/consistency");
        let x: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..3).map(|_| rng.random_range(0.5..10.0)).collect())
            .collect();
        let y: Vec<f64> = (0..20).map(|_| rng.random_range(-20.0..20.0)).collect();
        let m = build_model(&x, &y).unwrap();
        for q in 0..m.len() {
            let back = reconstruct(&m.coefficients[q], &m.regressors[q]).unwrap();
            assert!((back - m.regressands[q]).abs() <= 1e-9 * m.regressands[q].abs().max(1.0));
        }
    }

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(manhattan_distance(&[0.0, 0.0], &[1.0, -2.0]).unwrap(), 3.0);
        assert_eq!(manhattan_distance(&[5.0], &[2.0]).unwrap(), 3.0);
        assert!(manhattan_distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn line_model() -> AmrModel {
        build_model(&[vec![1.0], vec![2.0], vec![5.0]], &[10.0, 20.0, 50.0]).unwrap()
    }

    #[test]
    fn neighbor_selection_examples() {
        let m = line_model();
        // distances from 0.0 are (1, 2, 5)
        let (idx, dmin) = select_neighbors(&m, &[0.0], 2.5).unwrap();
        assert_eq!(idx, vec![0, 1]);
        assert_eq!(dmin, 1.0);

        let (idx, _) = select_neighbors(&m, &[0.0], 1.0).unwrap();
        assert_eq!(idx, vec![0]);

        let (idx, dmin) = select_neighbors(&m, &[2.0], 1.0).unwrap();
        assert_eq!(dmin, 0.0);
        assert_eq!(idx, vec![1]);
    }

    #[test]
    fn zero_distance_admits_only_exact_duplicates() {
        let m = build_model(&[vec![1.0], vec![3.0], vec![3.0]], &[1.0, 30.0, 31.0]).unwrap();
        let (idx, dmin) = select_neighbors(&m, &[3.0], 10.0).unwrap();
        assert_eq!(dmin, 0.0);
        assert_eq!(idx, vec![1, 2]);
    }

    #[test]
    fn predict_on_the_single_training_row() {
        let m = build_model(&[vec![2.0, 4.0]], &[8.0]).unwrap();
        for alpha in default_alpha_grid() {
            let p = predict(&m, &[2.0, 4.0], &HyperParams::new(alpha, 1.0).unwrap()).unwrap();
            assert_eq!(p.y_hat_ama, 8.0);
            assert_eq!(p.y_hat_knn, 8.0);
            assert!((p.y_hat - 8.0).abs() <= 1e-9 * 8.0);
        }
    }

    #[test]
    fn alpha_one_is_the_pure_model_component() {
        let m = line_model();
        let p = predict(&m, &[3.0], &HyperParams::new(1.0, 2.0).unwrap()).unwrap();
        assert_eq!(p.y_hat, p.y_hat_ama);
    }

    #[test]
    fn duplicate_rows_average_in_the_knn_component() {
        let m = build_model(&[vec![2.0], vec![2.0]], &[3.0, 5.0]).unwrap();
        let p = predict(&m, &[2.0], &HyperParams::new(0.5, 1.0).unwrap()).unwrap();
        assert_eq!(p.y_hat_knn, 4.0);
        assert_eq!(p.k, 2);
    }

    #[test]
    fn literal_sum_mode_scales_with_the_neighbor_count() {
        let m = build_model(&[vec![2.0], vec![2.0]], &[3.0, 5.0]).unwrap();
        let hp = HyperParams::new(0.5, 1.0).unwrap();
        let mean = predict_with(&m, &[2.0], &hp, Aggregation::Mean).unwrap();
        let sum = predict_with(&m, &[2.0], &hp, Aggregation::Sum).unwrap();
        assert_eq!(sum.k, 2);
        assert_eq!(sum.y_hat_ama, mean.y_hat_ama * 2.0);
        assert_eq!(sum.y_hat_knn, 8.0);
    }

    #[test]
    fn blend_is_affine_in_alpha() {
        let mut rng = rng_for(42, "model-test/affine");
        for _ in 0..50 {
            let n = rng.random_range(2..=10);
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| rng.random_range(0.5..3.0)).collect())
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
            let m = build_model(&x, &y).unwrap();
            let te = [rng.random_range(0.5..3.0), rng.random_range(0.5..3.0)];
            let alphas = [0.2, 0.5, 0.8];
            let traces: Vec<PredictionTrace> = alphas
                .iter()
                .map(|&a| predict(&m, &te, &HyperParams::new(a, 3.0).unwrap()).unwrap())
                .collect();
            let slope = traces[0].y_hat_ama - traces[0].y_hat_knn;
            for w in traces.windows(2) {
                let diff = w[1].y_hat - w[0].y_hat;
                assert!(
                    (diff - 0.3 * slope).abs() <= 1e-12,
                    "diff {diff} vs slope step {}",
                    0.3 * slope
                );
            }
        }
    }

    #[test]
    fn neighbor_count_is_monotone_in_delta() {
        let mut rng = rng_for(43, "model-test/monotone");
        for _ in 0..50 {
            let n = rng.random_range(3..=15);
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| rng.random_range(-5.0..5.0)).collect())
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let m = build_model(&x, &y).unwrap();
            let te = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let mut last_k = 0;
            for delta in 1..=10 {
                let (idx, _) = select_neighbors(&m, &te, delta as f64).unwrap();
                assert!(idx.len() >= last_k, "k shrank as delta grew");
                last_k = idx.len();
            }
        }
    }

    #[test]
    fn training_rows_are_reproduced_at_delta_one() {
        let mut rng = rng_for(44, "model-test/self");
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![i as f64 + 1.0, rng.random_range(0.5..5.0)])
            .collect();
        let y: Vec<f64> = (0..12).map(|_| rng.random_range(1.0..9.0)).collect();
        let m = build_model(&x, &y).unwrap();
        for (row, expected) in x.iter().zip(&y) {
            for alpha in [0.1, 0.6, 1.0] {
                let p = predict(&m, row, &HyperParams::new(alpha, 1.0).unwrap()).unwrap();
                assert!(
                    (p.y_hat - expected).abs() <= 1e-9 * expected.abs().max(1.0),
                    "{} vs {expected}",
                    p.y_hat
                );
            }
        }
    }

    #[test]
    fn identical_rows_make_every_grid_point_exact() {
        let ds = dataset(vec![vec![2.0, 3.0]; 3], vec![7.0; 3]);
        let alphas = default_alpha_grid();
        let deltas = vec![1.0, 2.0, 7.5];
        let r = grid_search_loocv(&ds, &alphas, &deltas).unwrap();
        assert_eq!(r.mae_op, 0.0);
        assert_eq!(r.delta_op, 7.5);
        assert_eq!(r.alpha_op, 1.0);
        assert!(r.r2_op.is_nan());
    }

    #[test]
    fn two_row_dataset_always_uses_one_neighbor() {
        let ds = dataset(vec![vec![1.0], vec![4.0]], vec![2.0, 8.0]);
        let out =
            grid_search_loocv_full(&ds, &default_alpha_grid(), &[1.0, 5.0], Aggregation::Mean)
                .unwrap();
        assert_eq!(out.neighbor_counts, vec![1, 1]);
    }

    #[test]
    fn degenerate_grid_matches_standalone_nearest_model_loocv() {
        let mut rng = rng_for(45, "model-test/degenerate-grid");
        let n = 9;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(0.5..8.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let ds = dataset(x.clone(), y.clone());
        let got = grid_search_loocv(&ds, &[1.0], &[1.0]).unwrap();

        // standalone: hold out each row, average the model predictions of all
        // rows tied at the nearest Manhattan distance
        let mut preds = Vec::new();
        for l in 0..n {
            let mut dmin = f64::INFINITY;
            for q in 0..n {
                if q == l {
                    continue;
                }
                let d: f64 = x[q].iter().zip(&x[l]).map(|(a, b)| (a - b).abs()).sum();
                if d < dmin {
                    dmin = d;
                }
            }
            let mut sum = 0.0;
            let mut k = 0;
            for q in 0..n {
                if q == l {
                    continue;
                }
                let d: f64 = x[q].iter().zip(&x[l]).map(|(a, b)| (a - b).abs()).sum();
                if d <= dmin {
                    let p = x[q].iter().filter(|v| **v != 0.0).count();
                    let pred: f64 = x[q]
                        .iter()
                        .zip(&x[l])
                        .map(|(xq, xl)| {
                            if *xq != 0.0 {
                                y[q] / (p as f64 * xq) * xl
                            } else {
                                0.0
                            }
                        })
                        .sum();
                    sum += pred;
                    k += 1;
                }
            }
            preds.push(sum / k as f64);
        }
        let expect_mae: f64 = preds
            .iter()
            .zip(&y)
            .map(|(p, a)| (a - p).abs())
            .sum::<f64>()
            / n as f64;
        assert!((got.mae_op - expect_mae).abs() <= 1e-12 * expect_mae.max(1.0));
        assert_eq!(got.alpha_op, 1.0);
        assert_eq!(got.delta_op, 1.0);
    }

    #[test]
    fn grid_search_is_deterministic() {
        let mut rng = rng_for(46, "model-test/deterministic");
        let x: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..2).map(|_| rng.random_range(0.5..5.0)).collect())
            .collect();
        let y: Vec<f64> = (0..15).map(|_| rng.random_range(-5.0..5.0)).collect();
        let ds = dataset(x, y);
        let a = grid_search_loocv(&ds, &default_alpha_grid(), &default_delta_grid()).unwrap();
        let b = grid_search_loocv(&ds, &default_alpha_grid(), &default_delta_grid()).unwrap();
        assert_eq!(a.mae_op, b.mae_op);
        assert_eq!(a.mse_op, b.mse_op);
        assert_eq!(a.alpha_op, b.alpha_op);
        assert_eq!(a.delta_op, b.delta_op);
        assert_eq!(a.k_op, b.k_op);
    }

    #[test]
    fn grid_validation() {
        let ds = dataset(vec![vec![1.0], vec![2.0]], vec![1.0, 2.0]);
        assert!(matches!(
            grid_search_loocv(&ds, &[], &[1.0]),
            Err(ModelError::InvalidGrid(_))
        ));
        assert!(matches!(
            grid_search_loocv(&ds, &[0.0], &[1.0]),
            Err(ModelError::InvalidGrid(_))
        ));
        assert!(matches!(
            grid_search_loocv(&ds, &[1.0], &[0.5]),
            Err(ModelError::InvalidGrid(_))
        ));
        let one_row = dataset(vec![vec![1.0]], vec![1.0]);
        assert!(matches!(
            grid_search_loocv(&one_row, &[1.0], &[1.0]),
            Err(ModelError::TooFewRows { have: 1 })
        ));
    }

    #[test]
    fn hyperparams_validation() {
        assert!(HyperParams::new(0.0, 1.0).is_err());
        assert!(HyperParams::new(1.1, 1.0).is_err());
        assert!(HyperParams::new(0.5, 0.9).is_err());
        assert!(HyperParams::new(0.5, 10.1).is_err());
        let hp = HyperParams::new(0.3, 2.0).unwrap();
        assert_eq!(hp.alpha() + hp.beta(), 1.0);
    }
}
