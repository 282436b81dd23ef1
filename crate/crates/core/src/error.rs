use thiserror::Error;

/// Errors raised across the estimator toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{name} is not unitary (max |A^dag A - I| = {deviation:.3e})")]
    NotUnitary { name: String, deviation: f64 },

    #[error("matrix is not symmetric (max |R - R^T| = {deviation:.3e})")]
    NotSymmetric { deviation: f64 },

    #[error("decomposition failed: reconstruction residual {residual:.3e}")]
    Decomposition { residual: f64 },

    #[error("size {size} exceeds the configured maximum {max} for {what}")]
    Size { what: &'static str, size: usize, max: usize },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("truncation failed: {0}")]
    Truncation(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("encoding failed: {0}")]
    Encoding(String),

    #[error("degenerate support: estimated mass {mass:.3e} is below {threshold:.3e}")]
    DegenerateSupport { mass: f64, threshold: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    /// True for errors caused by malformed or inconsistent inputs, as opposed
    /// to failures that happen while running (budgets, sampling, convergence).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::NotUnitary { .. }
                | Error::NotSymmetric { .. }
                | Error::InvalidState(_)
                | Error::InvalidOperator(_)
                | Error::InvalidConfig(_)
                | Error::Parse { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
