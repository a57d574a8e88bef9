use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    InvalidParameter { what: &'static str, reason: String },

    #[error("coefficients are not Hermitian-symmetric (defect {defect:.3e})")]
    SymmetryViolation { defect: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite values after the step ending at t = {t}")]
    StepFailure { t: f64 },

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            what,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
