use thiserror::Error;

use crate::lp::{LpError, LpStatus};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("linear program ended with status {0:?}")]
    Solver(LpStatus),

    #[error("non-positive covariate {value} at row {row}, column {col}")]
    NonPositiveEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, not 1")]
    NotOnSimplex { row: usize, sum: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("quantile level {0} is outside (0, 1)")]
    TauOutOfRange(f64),
    #[error("design has no observations or no covariates")]
    EmptyDesign,
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("penalty level {0} is negative or not finite")]
    NegativeLambda(f64),
    #[error("adaptive weight {value} at index {index} is not positive and finite")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("check loss is zero; BIC is undefined")]
    ZeroLossDegenerate,
    #[error("every penalty level on the grid produced a zero-loss fit")]
    AllLambdasDegenerate,

    #[error("constrained least-squares system is singular")]
    SingularSystem,
    #[error("covariance factorization failed")]
    FactorizationFailure,
    #[error("unsupported error distribution '{0}'")]
    UnsupportedDistribution(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("value {0} is outside the open interval (0, 100)")]
    OutOfDomain(f64),
    #[error("{n} observations cannot fill {k} folds")]
    FoldTooSmall { n: usize, k: usize },
    #[error("test response is constant; NMSE is undefined")]
    ConstantResponse,
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse {
        row: usize,
        col: String,
        msg: String,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by bad user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveEntry { .. }
                | Error::NotOnSimplex { .. }
                | Error::DimensionMismatch(_)
                | Error::TauOutOfRange(_)
                | Error::EmptyDesign
                | Error::NegativeLambda(_)
                | Error::NonPositiveWeight { .. }
                | Error::UnsupportedDistribution(_)
                | Error::InvalidConfig(_)
                | Error::OutOfDomain(_)
                | Error::FoldTooSmall { .. }
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::Lp(LpError::DimensionMismatch(_))
                | Error::Lp(LpError::NonFiniteInput(_))
        )
    }
}
