use thiserror::Error;

use crate::tomography::FitResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("size {got} exceeds the supported maximum of {max}")]
    Size { got: usize, max: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("parity error: {0}")]
    Parity(String),

    #[error("visibility undefined: distinguishable coincidence rate is zero")]
    UndefinedVisibility,

    #[error("similarity undefined: {0}")]
    UndefinedSimilarity(String),

    #[error("fit did not converge after {starts} starts (best chi-square {})", best.residual)]
    Convergence { starts: usize, best: Box<FitResult> },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }

    pub(crate) fn index(msg: impl Into<String>) -> Self {
        Error::Index(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, message: msg.into() }
    }
}
