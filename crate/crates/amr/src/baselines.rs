//! Reference regressors: k-nearest-neighbors, ordinary least squares with an
//! intercept, and a CART-style regression tree with variance-reduction
//! splits. All three are deterministic.

use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{least_squares, DenseMatrix, LinalgError};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("need at least {needed} training rows, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Manhattan,
}

impl DistanceMetric {
    fn distance(self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            DistanceMetric::Euclidean => u
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            DistanceMetric::Manhattan => u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KnnConfig {
    pub k: usize,
    pub metric: DistanceMetric,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 1,
            metric: DistanceMetric::Euclidean,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_leaf: 2,
        }
    }
}

/// Mean regressand of the k nearest training rows; distance ties break to
/// the lower row index.
pub fn knn_predict(
    x_tr: &[Vec<f64>],
    y_tr: &[f64],
    x_te: &[f64],
    config: &KnnConfig,
) -> Result<f64, BaselineError> {
    if x_tr.len() != y_tr.len() {
        return Err(BaselineError::LengthMismatch {
            left: x_tr.len(),
            right: y_tr.len(),
        });
    }
    if config.k == 0 {
        return Err(BaselineError::InvalidConfig(
            "k must be positive".to_string(),
        ));
    }
    if x_tr.len() < config.k {
        return Err(BaselineError::InsufficientData {
            needed: config.k,
            have: x_tr.len(),
        });
    }
    let mut order: Vec<(f64, usize)> = x_tr
        .iter()
        .enumerate()
        .map(|(i, row)| (config.metric.distance(x_te, row), i))
        .collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut acc = 0.0;
    for (_, i) in order.iter().take(config.k) {
        acc += y_tr[*i];
    }
    Ok(acc / config.k as f64)
}

/// Outcome of the LOOCV scan over neighbor counts.
#[derive(Debug, Clone)]
pub struct KnnSelection {
    pub k: usize,
    pub mae: f64,
    /// LOOCV predictions at the selected k, in row order.
    pub predictions: Vec<f64>,
}

/// Chooses k by full-dataset LOOCV MAE over `k = 1..=min(k_cap, n-1)`,
/// ties to the smaller k.
pub fn knn_select_k(
    x: &[Vec<f64>],
    y: &[f64],
    k_cap: usize,
    metric: DistanceMetric,
) -> Result<KnnSelection, BaselineError> {
    let n = x.len();
    if n != y.len() {
        return Err(BaselineError::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    if n < 2 {
        return Err(BaselineError::InsufficientData { needed: 2, have: n });
    }
    let k_max = k_cap.min(n - 1).max(1);

    // sorted_ys[l]: the other rows' regressands ordered by (distance, index)
    let sorted_ys: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|l| {
            let mut order: Vec<(f64, usize)> = (0..n)
                .filter(|q| *q != l)
                .map(|q| (metric.distance(&x[l], &x[q]), q))
                .collect();
            order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            order.iter().map(|(_, q)| y[*q]).collect()
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    let mut errors = vec![0.0; k_max + 1];
    for (l, ys) in sorted_ys.iter().enumerate() {
        let mut prefix = 0.0;
        for k in 1..=k_max {
            prefix += ys[k - 1];
            errors[k] += (y[l] - prefix / k as f64).abs();
        }
    }
    for (k, err) in errors.iter().enumerate().skip(1) {
        let mae = err / n as f64;
        if best.is_none_or(|(_, b)| mae < b) {
            best = Some((k, mae));
        }
    }
    let (k, mae) = best.expect("k_max >= 1");
    let predictions: Vec<f64> = sorted_ys
        .iter()
        .map(|ys| ys.iter().take(k).sum::<f64>() / k as f64)
        .collect();
    Ok(KnnSelection {
        k,
        mae,
        predictions,
    })
}

/// Ordinary least squares with an intercept column, evaluated at `x_te`.
pub fn linreg_fit_predict(
    x_tr: &[Vec<f64>],
    y_tr: &[f64],
    x_te: &[f64],
) -> Result<f64, BaselineError> {
    if x_tr.len() != y_tr.len() {
        return Err(BaselineError::LengthMismatch {
            left: x_tr.len(),
            right: y_tr.len(),
        });
    }
    let design: Vec<Vec<f64>> = x_tr
        .iter()
        .map(|row| {
            let mut r = Vec::with_capacity(row.len() + 1);
            r.push(1.0);
            r.extend_from_slice(row);
            r
        })
        .collect();
    let coeffs = least_squares(&DenseMatrix::from_rows(&design), y_tr)?;
    let mut pred = coeffs[0];
    for (c, v) in coeffs[1..].iter().zip(x_te) {
        pred += c * v;
    }
    Ok(pred)
}

enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// CART regression tree: greedy binary splits minimizing summed child
/// squared error, thresholds at midpoints between adjacent sorted values,
/// leaves predicting the mean.
pub struct RegressionTree {
    root: Node,
}

impl RegressionTree {
    pub fn fit(x: &[Vec<f64>], y: &[f64], config: &TreeConfig) -> Result<Self, BaselineError> {
        if x.len() != y.len() {
            return Err(BaselineError::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if config.min_leaf == 0 {
            return Err(BaselineError::InvalidConfig(
                "min_leaf must be positive".to_string(),
            ));
        }
        if x.len() < config.min_leaf {
            return Err(BaselineError::InsufficientData {
                needed: config.min_leaf,
                have: x.len(),
            });
        }
        let indices: Vec<usize> = (0..x.len()).collect();
        Ok(Self {
            root: build_node(x, y, &indices, 0, config),
        })
    }

    pub fn predict(&self, x_te: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(value) => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x_te[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Mean squared error over a sample set.
    pub fn mse_on(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (row, actual) in x.iter().zip(y) {
            let d = actual - self.predict(row);
            acc += d * d;
        }
        acc / y.len() as f64
    }
}

fn mean_of(y: &[f64], indices: &[usize]) -> f64 {
    indices.iter().map(|&i| y[i]).sum::<f64>() / indices.len() as f64
}

fn sse_of(y: &[f64], indices: &[usize]) -> f64 {
    let mean = mean_of(y, indices);
    indices
        .iter()
        .map(|&i| {
            let d = y[i] - mean;
            d * d
        })
        .sum()
}

#[allow(clippy::needless_range_loop)]
fn build_node(
    x: &[Vec<f64>],
    y: &[f64],
    indices: &[usize],
    depth: usize,
    config: &TreeConfig,
) -> Node {
    if depth >= config.max_depth || indices.len() < 2 * config.min_leaf {
        return Node::Leaf(mean_of(y, indices));
    }
    let node_sse = sse_of(y, indices);
    let m = x[0].len();

    // best = (score, feature, threshold); scanning features ascending and
    // thresholds ascending with a strict < keeps the tie-break deterministic
    let mut best: Option<(f64, usize, f64)> = None;
    for feature in 0..m {
        let mut order: Vec<usize> = indices.to_vec();
        order.sort_unstable_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]).then(a.cmp(&b)));

        // prefix sums over the sorted order
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let prefix: Vec<(f64, f64)> = order
            .iter()
            .map(|&i| {
                sum += y[i];
                sum_sq += y[i] * y[i];
                (sum, sum_sq)
            })
            .collect();
        let (total, total_sq) = *prefix.last().expect("nonempty node");

        for pos in config.min_leaf..=order.len() - config.min_leaf {
            let v_left = x[order[pos - 1]][feature];
            let v_right = x[order[pos]][feature];
            if v_left == v_right {
                continue;
            }
            let (ls, lsq) = prefix[pos - 1];
            let left_n = pos as f64;
            let right_n = (order.len() - pos) as f64;
            let sse_left = (lsq - ls * ls / left_n).max(0.0);
            let rs = total - ls;
            let rsq = total_sq - lsq;
            let sse_right = (rsq - rs * rs / right_n).max(0.0);
            let score = sse_left + sse_right;
            if best.is_none_or(|(b, _, _)| score < b) {
                best = Some((score, feature, (v_left + v_right) / 2.0));
            }
        }
    }

    match best {
        Some((score, feature, threshold)) if score < node_sse => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                indices.iter().partition(|&&i| x[i][feature] <= threshold);
            Node::Split {
                feature,
                threshold,
                left: Box::new(build_node(x, y, &left_idx, depth + 1, config)),
                right: Box::new(build_node(x, y, &right_idx, depth + 1, config)),
            }
        }
        _ => Node::Leaf(mean_of(y, indices)),
    }
}

/// Fits a tree and evaluates it at `x_te`.
pub fn dtree_fit_predict(
    x_tr: &[Vec<f64>],
    y_tr: &[f64],
    x_te: &[f64],
    config: &TreeConfig,
) -> Result<f64, BaselineError> {
    Ok(RegressionTree::fit(x_tr, y_tr, config)?.predict(x_te))
}
