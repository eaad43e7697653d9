//! Arithmetic-method regression toolkit.
//!
//! The core idea is an equal-share decomposition of a single linear equation:
//! given coefficients `a` and a target `y`, every active term `a_j * x_j` is
//! assigned the share `y / p` (with `p` the number of active dimensions), so
//! the dot product reconstructs `y` exactly. Running the decomposition in the
//! inverse direction (regressors -> coefficients) yields a per-instance linear
//! model; blending the average of those models over an adaptively sized
//! neighborhood with a plain k-NN average gives the hybrid regressor in
//! [`model`].
//!
//! The crate ships everything needed to evaluate that regressor the way a
//! benchmark study would:
//!
//! - [`ama`] - the equal-share solver, its inverse, and a randomized
//!   million-dimension numerical validation sweep.
//! - [`linalg`] - a small dense-matrix layer: normal-equation least squares
//!   and a power-iteration spectral norm.
//! - [`theory`] - numerical checks of the solver's operator identities
//!   (residual bound, pseudoinverse deviation, perturbation stability) plus
//!   the closed-form MSE-optimal blend coefficient.
//! - [`model`] - the hybrid regressor: per-instance model building, Manhattan
//!   delta-neighborhoods, alpha-blended prediction, and the (alpha, delta)
//!   grid search under leave-one-out cross-validation.
//! - [`baselines`] - k-NN, ordinary-least-squares, and CART regression
//!   baselines built from first principles.
//! - [`eval`] - the LOOCV driver, MAE/MSE/RMSE/R² metrics, the paired
//!   sign-flip permutation test, and the comparison decision rule.
//! - [`data`] - CSV ingestion, missing-row removal, nominal encoding, and
//!   correlation-based feature subset selection.
//! - [`cli`] - the subcommand implementations behind the `amr` binary.
//!
//! All randomness flows from a single root seed split per subsystem by stable
//! string labels (see [`seeding`]), so every run is reproducible bit-for-bit
//! apart from wall-clock timing fields.

pub mod ama;
pub mod baselines;
pub mod cli;
pub mod data;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod seeding;
pub mod theory;
