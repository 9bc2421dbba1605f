use std::io;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum DoaError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("singular target: target matrix has zero Frobenius norm")]
    SingularTarget,

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("estimation failure: {reason}")]
    EstimationFailure {
        reason: String,
        /// Moduli of all polynomial roots that were found.
        root_moduli: Vec<f64>,
        /// Eigenvalue spectrum of the covariance handed to the estimator.
        spectrum: Vec<f64>,
    },

    #[error("infeasible sampling: {0}")]
    Infeasible(String),

    #[error("singular loss evaluation at a rejected point: {0}")]
    SingularPoint(String),

    #[error("training diverged at step {step}: non-finite loss or gradient")]
    Diverged { step: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, DoaError>;

impl DoaError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        DoaError::Domain(msg.into())
    }

    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        DoaError::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Short machine-readable tag, used by the command-line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            DoaError::Domain(_) => "domain",
            DoaError::DimensionMismatch { .. } => "dimension",
            DoaError::SingularTarget => "singular-target",
            DoaError::UnsupportedGeometry(_) => "unsupported-geometry",
            DoaError::EstimationFailure { .. } => "estimation-failure",
            DoaError::Infeasible(_) => "infeasible",
            DoaError::SingularPoint(_) => "singular-point",
            DoaError::Diverged { .. } => "diverged",
            DoaError::Format(_) => "format",
            DoaError::Config(_) => "config",
            DoaError::Io(_) => "io",
        }
    }
}
