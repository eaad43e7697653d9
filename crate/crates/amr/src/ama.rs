//! Equal-share decomposition of a single linear equation.
//!
//! For coefficients `a` and target `y`, each active dimension (nonzero
//! coefficient) is assigned an equal share of the target: `x_j = y / (p *
//! a_j)` where `p` counts the active dimensions. Every active product then
//! equals `y / p` and the dot product reconstructs `y` up to rounding.
//! The inverse direction ([`fit_instance`]) computes coefficients from a
//! regressor vector and its regressand, which is how the hybrid regressor
//! builds one linear model per training instance.
//!
//! [`ama_validate`] runs the randomized validation sweep: at each requested
//! dimension count it draws a random instance, solves it, reconstructs the
//! target, and records timing and percentage error.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::seeding::rng_for;

/// Smallest |y| drawn by the validation sweep; keeps percentage error defined.
const MIN_ABS_TARGET: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum AmaError {
    #[error("coefficient vector is empty")]
    EmptyVector,
    #[error("all coefficients are zero but the target {target} is not")]
    DegenerateInstance { target: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("checkpoints must be nonempty, positive, and strictly ascending")]
    InvalidCheckpoints,
}

/// How the per-dimension divisor is formed.
///
/// `ActiveCount` divides by the number of active dimensions, which makes the
/// reconstruction exact. `PositionIndex` divides by the 1-based position
/// instead, reproducing the harmonic-growth reading of the recurrence for
/// diagnostic comparison (the reconstruction then sums to `y * H_n`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DivisorRule {
    #[default]
    ActiveCount,
    PositionIndex,
}

/// A coefficients/solution pair together with the reconstructed target.
#[derive(Debug, Clone)]
pub struct AmaDecomposition {
    /// Coefficient vector.
    pub a: Vec<f64>,
    /// Solution (regressor) vector.
    pub x: Vec<f64>,
    /// Target value.
    pub y: f64,
    /// Reconstructed target, `sum(a_j * x_j)`.
    pub y_hat: f64,
    /// Number of active (nonzero-regressor) dimensions.
    pub p: usize,
}

/// One row of the validation sweep.
#[derive(Debug, Clone)]
pub struct ValidationRecord {
    /// Dimension count of the instance.
    pub dims: usize,
    /// Actual target value.
    pub y: f64,
    /// Reconstructed target value.
    pub y_hat: f64,
    /// Wall-clock time for the instance, in seconds.
    pub t_seconds: f64,
    /// Percentage error `|y_hat - y| / |y| * 100`.
    pub eps_percent: f64,
}

fn active_count(values: &[f64]) -> usize {
    values.iter().filter(|v| **v != 0.0).count()
}

/// Solves `a . x = y` by equal shares.
///
/// Active dimensions get `x_j = y / (p * a_j)`; inactive dimensions get zero.
pub fn solve_row(a: &[f64], y: f64) -> Result<Vec<f64>, AmaError> {
    solve_row_with(a, y, DivisorRule::ActiveCount)
}

/// [`solve_row`] with an explicit divisor rule.
pub fn solve_row_with(a: &[f64], y: f64, rule: DivisorRule) -> Result<Vec<f64>, AmaError> {
    if a.is_empty() {
        return Err(AmaError::EmptyVector);
    }
    let p = active_count(a);
    if p == 0 && y != 0.0 {
        return Err(AmaError::DegenerateInstance { target: y });
    }
    let x = match rule {
        DivisorRule::ActiveCount => a
            .iter()
            .map(|&aj| if aj != 0.0 { y / (p as f64 * aj) } else { 0.0 })
            .collect(),
        // Verbatim recurrence: no masking of zero coefficients.
        DivisorRule::PositionIndex => a
            .iter()
            .enumerate()
            .map(|(j, &aj)| y / ((j + 1) as f64 * aj))
            .collect(),
    };
    Ok(x)
}

/// Dot product `sum(a_j * x_j)`, accumulated left to right.
pub fn reconstruct(a: &[f64], x: &[f64]) -> Result<f64, AmaError> {
    if a.len() != x.len() {
        return Err(AmaError::LengthMismatch {
            left: a.len(),
            right: x.len(),
        });
    }
    let mut y_hat = 0.0;
    for (aj, xj) in a.iter().zip(x) {
        y_hat += aj * xj;
    }
    Ok(y_hat)
}

/// Inverse direction: computes coefficients from a regressor vector and its
/// regressand, so that the decomposition reconstructs `y`.
pub fn fit_instance(x: &[f64], y: f64) -> Result<AmaDecomposition, AmaError> {
    fit_instance_with(x, y, DivisorRule::ActiveCount)
}

/// [`fit_instance`] with an explicit divisor rule.
pub fn fit_instance_with(
    x: &[f64],
    y: f64,
    rule: DivisorRule,
) -> Result<AmaDecomposition, AmaError> {
    if x.is_empty() {
        return Err(AmaError::EmptyVector);
    }
    let p = active_count(x);
    if p == 0 && y != 0.0 {
        return Err(AmaError::DegenerateInstance { target: y });
    }
    let a: Vec<f64> = match rule {
        DivisorRule::ActiveCount => x
            .iter()
            .map(|&xi| if xi != 0.0 { y / (p as f64 * xi) } else { 0.0 })
            .collect(),
        DivisorRule::PositionIndex => x
            .iter()
            .enumerate()
            .map(|(i, &xi)| y / ((i + 1) as f64 * xi))
            .collect(),
    };
    let y_hat = reconstruct(&a, x)?;
    Ok(AmaDecomposition {
        a,
        x: x.to_vec(),
        y,
        y_hat,
        p,
    })
}

/// Runs the randomized validation sweep at the given dimension checkpoints.
///
/// Per checkpoint `i`, draws `i` coefficients and a target uniformly from
/// `value_range` (with `|y| >= 1e-3` enforced), solves, reconstructs, and
/// records `(i, y, y_hat, t, eps)`. Checkpoints are evaluated in parallel,
/// each on its own seed-derived stream, and merged in ascending order.
pub fn ama_validate(
    checkpoints: &[usize],
    value_range: (f64, f64),
    seed: u64,
    rule: DivisorRule,
) -> Result<Vec<ValidationRecord>, AmaError> {
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(AmaError::InvalidCheckpoints);
    }
    let (lo, hi) = value_range;
    checkpoints
        .par_iter()
        .map(|&dims| {
            let mut rng = rng_for(seed, &format!("ama-validate/{dims}"));
            let start = Instant::now();
            let mut a = Vec::with_capacity(dims);
            for _ in 0..dims {
                a.push(rng.random_range(lo..hi));
            }
            let y = loop {
                let candidate: f64 = rng.random_range(lo..hi);
                if candidate.abs() >= MIN_ABS_TARGET {
                    break candidate;
                }
            };
            let x = solve_row_with(&a, y, rule)?;
            let y_hat = reconstruct(&a, &x)?;
            let t_seconds = start.elapsed().as_secs_f64();
            let eps_percent = ((y_hat - y) / y).abs() * 100.0;
            Ok(ValidationRecord {
                dims,
                y,
                y_hat,
                t_seconds,
                eps_percent,
            })
        })
        .collect()
}

/// Writes validation records as CSV with header `i,y,y_hat,t_seconds,eps_percent`.
pub fn write_validation_csv<W: Write>(
    records: &[ValidationRecord],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "i,y,y_hat,t_seconds,eps_percent")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.dims, r.y, r.y_hat, r.t_seconds, r.eps_percent
        )?;
    }
    Ok(())
}
