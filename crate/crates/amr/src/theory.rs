//! Numerical verification of the equal-share solver's operator identities.
//!
//! The solver is linear in the target, so for a coefficient row `a` there is
//! a column vector `L` with `x = L * y`. This module builds `L`, checks the
//! right-inverse identity `a . L = 1`, the residual bound against the
//! least-squares solution, the deviation bound against the Moore-Penrose
//! pseudoinverse, and probes perturbation stability empirically. It also
//! computes the closed-form MSE-optimal blend coefficient between two
//! predictors and the empirical risk it minimizes.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ama::{solve_row, AmaError};
use crate::linalg::{least_squares, norm2, spectral_norm, sub, DenseMatrix, LinalgError};
use crate::seeding::rng_for;

/// Relative slack allowed when declaring an inequality satisfied.
const BOUND_RTOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("all coefficients are zero")]
    DegenerateInstance,
    #[error("predictors are identical; blend coefficient is undefined")]
    IdenticalPredictors,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("perturbation budgets are both zero")]
    ZeroPerturbation,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Ama(#[from] AmaError),
}

/// Two sides of an inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub slack: f64,
}

impl BoundReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs + BOUND_RTOL * rhs.max(1.0),
            slack: rhs - lhs,
        }
    }
}

/// The column vector `L` with `solve_row(a, y) == L * y`:
/// `L_j = 1 / (p * a_j)` on active dimensions, zero elsewhere.
pub fn ama_left_operator(a_row: &[f64]) -> Result<Vec<f64>, TheoryError> {
    let p = a_row.iter().filter(|v| **v != 0.0).count();
    if p == 0 {
        return Err(TheoryError::DegenerateInstance);
    }
    Ok(a_row
        .iter()
        .map(|&aj| {
            if aj != 0.0 {
                1.0 / (p as f64 * aj)
            } else {
                0.0
            }
        })
        .collect())
}

/// Checks `||A x - b|| <= ||A|| ||x - x_ls|| + ||A x_ls - b||` for a
/// candidate solution `x_cand`. Holds for every finite candidate by the
/// triangle inequality.
pub fn residual_bound_check(
    a: &DenseMatrix,
    b: &[f64],
    x_cand: &[f64],
) -> Result<BoundReport, TheoryError> {
    let x_ls = least_squares(a, b)?;
    let lhs = norm2(&sub(&a.matvec(x_cand), b));
    let ls_residual = norm2(&sub(&a.matvec(&x_ls), b));
    let rhs = spectral_norm(a)? * norm2(&sub(x_cand, &x_ls)) + ls_residual;
    Ok(BoundReport::new(lhs, rhs))
}

/// Checks `||x_solver - pinv(a) b|| <= ||L - pinv(a)|| |b|` for a single
/// coefficient row, with `pinv(a) = a^T / (a a^T)`.
pub fn deviation_bound_check(a_row: &[f64], b: f64) -> Result<BoundReport, TheoryError> {
    let x = solve_row(a_row, b)?;
    let l = ama_left_operator(a_row)?;
    let dot: f64 = a_row.iter().map(|v| v * v).sum();
    let pinv: Vec<f64> = a_row.iter().map(|&aj| aj / dot).collect();
    let pinv_b: Vec<f64> = pinv.iter().map(|&pj| pj * b).collect();
    let lhs = norm2(&sub(&x, &pinv_b));
    let rhs = norm2(&sub(&l, &pinv)) * b.abs();
    Ok(BoundReport::new(lhs, rhs))
}

/// Empirically probes the Lipschitz behavior of the solver under input
/// perturbations.
///
/// The solver is applied row-wise: row `i` of `a` is solved against `b[i]`,
/// and the stacked solutions form the output. Over `trials` random
/// perturbations with `||dA||_2 <= eta_a` and `||db||_2 <= eta_b`, returns
/// the largest observed `||x(A+dA, b+db) - x(A, b)||_2 / (eta_a + eta_b)`.
pub fn stability_probe(
    a: &DenseMatrix,
    b: &[f64],
    eta_a: f64,
    eta_b: f64,
    trials: usize,
    seed: u64,
) -> Result<f64, TheoryError> {
    if eta_a + eta_b <= 0.0 {
        return Err(TheoryError::ZeroPerturbation);
    }
    if b.len() != a.rows {
        return Err(TheoryError::LengthMismatch {
            left: b.len(),
            right: a.rows,
        });
    }
    let base = solve_rows(a, b)?;
    let mut max_ratio: f64 = 0.0;
    for trial in 0..trials {
        let mut rng = rng_for(seed, &format!("stability/{trial}"));
        let da = if eta_a > 0.0 {
            let raw = DenseMatrix::new(
                a.rows,
                a.cols,
                (0..a.rows * a.cols)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            );
            let s = spectral_norm(&raw)?;
            if s == 0.0 {
                DenseMatrix::zeros(a.rows, a.cols)
            } else {
                let scale = eta_a / s;
                DenseMatrix::new(
                    a.rows,
                    a.cols,
                    (0..a.rows)
                        .flat_map(|i| {
                            raw.row(i)
                                .iter()
                                .map(move |v| v * scale)
                                .collect::<Vec<_>>()
                        })
                        .collect(),
                )
            }
        } else {
            DenseMatrix::zeros(a.rows, a.cols)
        };
        let db: Vec<f64> = if eta_b > 0.0 {
            let raw: Vec<f64> = (0..b.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = norm2(&raw);
            if n == 0.0 {
                vec![0.0; b.len()]
            } else {
                raw.iter().map(|v| v * eta_b / n).collect()
            }
        } else {
            vec![0.0; b.len()]
        };

        let perturbed_a = DenseMatrix::new(
            a.rows,
            a.cols,
            (0..a.rows)
                .flat_map(|i| {
                    a.row(i)
                        .iter()
                        .zip(da.row(i))
                        .map(|(x, d)| x + d)
                        .collect::<Vec<_>>()
                })
                .collect(),
        );
        let perturbed_b: Vec<f64> = b.iter().zip(&db).map(|(x, d)| x + d).collect();
        let moved = solve_rows(&perturbed_a, &perturbed_b)?;
        let diff: f64 = base
            .iter()
            .zip(&moved)
            .map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        max_ratio = max_ratio.max(diff / (eta_a + eta_b));
    }
    Ok(max_ratio)
}

fn solve_rows(a: &DenseMatrix, b: &[f64]) -> Result<Vec<Vec<f64>>, TheoryError> {
    (0..a.rows)
        .map(|i| solve_row(a.row(i), b[i]).map_err(TheoryError::from))
        .collect()
}

/// Closed-form minimizer of the empirical blend risk:
/// `alpha_hat = sum((y - v)(u - v)) / sum((u - v)^2)`.
pub fn optimal_alpha(y: &[f64], u: &[f64], v: &[f64]) -> Result<f64, TheoryError> {
    check_triple(y, u, v)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..y.len() {
        let du = u[i] - v[i];
        num += (y[i] - v[i]) * du;
        den += du * du;
    }
    if den == 0.0 {
        return Err(TheoryError::IdenticalPredictors);
    }
    Ok(num / den)
}

/// Mean squared error of the blend `alpha*u + (1-alpha)*v` against `y`.
pub fn empirical_risk(y: &[f64], u: &[f64], v: &[f64], alpha: f64) -> Result<f64, TheoryError> {
    check_triple(y, u, v)?;
    let mut acc = 0.0;
    for i in 0..y.len() {
        let e = alpha * u[i] + (1.0 - alpha) * v[i] - y[i];
        acc += e * e;
    }
    Ok(acc / y.len() as f64)
}

fn check_triple(y: &[f64], u: &[f64], v: &[f64]) -> Result<(), TheoryError> {
    if y.is_empty() {
        return Err(TheoryError::LengthMismatch { left: 0, right: 0 });
    }
    if u.len() != y.len() {
        return Err(TheoryError::LengthMismatch {
            left: y.len(),
            right: u.len(),
        });
    }
    if v.len() != y.len() {
        return Err(TheoryError::LengthMismatch {
            left: y.len(),
            right: v.len(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Randomized verification suites (driven by the `theory-check` subcommand)
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub trials: usize,
    pub passes: usize,
    pub violations: Vec<String>,
}

impl SuiteReport {
    fn record(name: &str, trials: usize, violations: Vec<String>) -> Self {
        Self {
            name: name.to_string(),
            trials,
            passes: trials - violations.len(),
            violations,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TheoryReport {
    pub seed: u64,
    pub trials: usize,
    pub suites: Vec<SuiteReport>,
    pub all_passed: bool,
}

fn random_full_rank(rng: &mut impl Rng) -> (DenseMatrix, Vec<f64>) {
    loop {
        let m = rng.random_range(2..=8);
        let n = rng.random_range(1..=m);
        let a = DenseMatrix::new(
            m,
            n,
            (0..m * n).map(|_| rng.random_range(-5.0..5.0)).collect(),
        );
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        if least_squares(&a, &b).is_ok() {
            return (a, b);
        }
    }
}

fn random_row(rng: &mut impl Rng, min_abs: f64) -> Vec<f64> {
    let n = rng.random_range(1..=8);
    (0..n)
        .map(|_| {
            let sign = if rng.random_range(0..2) == 0 {
                -1.0
            } else {
                1.0
            };
            sign * rng.random_range(min_abs..5.0)
        })
        .collect()
}

/// Runs every verification suite and aggregates the outcome.
pub fn run_all_checks(trials: usize, seed: u64) -> Result<TheoryReport, TheoryError> {
    let mut suites = Vec::new();

    let mut violations = Vec::new();
    let mut rng = rng_for(seed, "theory/residual");
    for t in 0..trials {
        let (a, b) = random_full_rank(&mut rng);
        let x_ls = least_squares(&a, &b)?;
        let x_cand: Vec<f64> = x_ls
            .iter()
            .map(|x| x + rng.random_range(-2.0..2.0))
            .collect();
        let report = residual_bound_check(&a, &b, &x_cand)?;
        if !report.holds {
            violations.push(format!(
                "trial {t}: lhs {} > rhs {}",
                report.lhs, report.rhs
            ));
        }
    }
    suites.push(SuiteReport::record("residual_bound", trials, violations));

    let mut violations = Vec::new();
    let mut rng = rng_for(seed, "theory/deviation");
    for t in 0..trials {
        let a = random_row(&mut rng, 0.1);
        let b = rng.random_range(-10.0..10.0);
        let report = deviation_bound_check(&a, b)?;
        if !report.holds {
            violations.push(format!(
                "trial {t}: lhs {} > rhs {}",
                report.lhs, report.rhs
            ));
        }
    }
    suites.push(SuiteReport::record("deviation_bound", trials, violations));

    let mut violations = Vec::new();
    let mut rng = rng_for(seed, "theory/left-identity");
    for t in 0..trials {
        let a = random_row(&mut rng, 0.1);
        let l = ama_left_operator(&a)?;
        let dot: f64 = a.iter().zip(&l).map(|(x, y)| x * y).sum();
        if (dot - 1.0).abs() > 1e-9 {
            violations.push(format!("trial {t}: a.L = {dot}"));
        }
    }
    suites.push(SuiteReport::record(
        "left_inverse_identity",
        trials,
        violations,
    ));

    let mut violations = Vec::new();
    let mut rng = rng_for(seed, "theory/stability");
    for t in 0..trials {
        let a_row = random_row(&mut rng, 0.5);
        let b = rng.random_range(-10.0..10.0);
        let a = DenseMatrix::from_rows(std::slice::from_ref(&a_row));
        // target-only perturbation: linearity makes the ratio at most ||L||
        let l = ama_left_operator(&a_row)?;
        let ratio = stability_probe(&a, &[b], 0.0, 0.01, 20, seed.wrapping_add(t as u64))?;
        let cap = norm2(&l) + 1e-9;
        if !(ratio.is_finite() && ratio <= cap) {
            violations.push(format!("trial {t}: target ratio {ratio} exceeds {cap}"));
        }
        // joint perturbation: only finiteness is asserted
        let ratio = stability_probe(&a, &[b], 0.05, 0.01, 20, seed.wrapping_add(t as u64))?;
        if !ratio.is_finite() {
            violations.push(format!("trial {t}: joint ratio not finite"));
        }
    }
    suites.push(SuiteReport::record("stability_probe", trials, violations));

    let mut violations = Vec::new();
    let mut rng = rng_for(seed, "theory/alpha");
    let alpha_trials = trials * 2;
    for t in 0..alpha_trials {
        let n = rng.random_range(3..=30);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let alpha_hat = match optimal_alpha(&y, &u, &v) {
            Ok(a) => a,
            Err(TheoryError::IdenticalPredictors) => continue,
            Err(e) => return Err(e),
        };
        let best = empirical_risk(&y, &u, &v, alpha_hat)?;
        for step in 0..=100 {
            let alpha = step as f64 / 100.0;
            let risk = empirical_risk(&y, &u, &v, alpha)?;
            if best > risk + 1e-12 {
                violations.push(format!(
                    "trial {t}: risk({alpha_hat}) = {best} > risk({alpha}) = {risk}"
                ));
                break;
            }
        }
    }
    suites.push(SuiteReport::record(
        "alpha_grid_dominance",
        alpha_trials,
        violations,
    ));

    let all_passed = suites.iter().all(|s| s.violations.is_empty());
    Ok(TheoryReport {
        seed,
        trials,
        suites,
        all_passed,
    })
}
