//! Quantile regression for compositional covariates.
//!
//! The zero-sum log-contrast model `Y = Zβ + ε, Σβ_j = 0` is fitted at a
//! quantile level τ by casting the check-loss objective (optionally with an
//! adaptive-LASSO penalty) as a linear program and solving it with a dense
//! two-phase simplex.
//!
//! * [`lp`]: the simplex solver.
//! * [`model`]: closure, centering, check loss, LP assembly, and fitting.
//! * [`tuning`]: adaptive weights, BIC, λ grids.
//! * [`sim`]: data generation and Monte Carlo harness.
//! * [`eval`]: CSV input, cross-validation, NMSE comparisons.

pub mod error;
pub mod eval;
pub mod lp;
pub mod model;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};
pub use lp::{solve_lp, solve_lp_costs, LpError, LpProblem, LpSolution, LpStatus};
pub use model::{
    build_penalized_lp, build_unpenalized_lp, check_loss, closure, fit_penalized,
    fit_penalized_path, fit_qr, log_contrast_design, predict, predict_linear, CompositionalDataset,
    CovariateTransform, LogContrastDesign, QuantileFit,
};
pub use tuning::{adaptive_weights, bic, fit_adaptive_lasso, GridSpec, TuningPath};
