use thiserror::Error;

/// Errors raised by the laboratory. Infeasibility of a constrained coupling
/// is not an error; see [`crate::transport::ConstrainedCoupling`].
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("size cap exceeded: {what} needs {needed} entries, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        needed: usize,
        cap: usize,
    },

    #[error("no feasible coupling for pair ({x}, {y}) below the diameter ratio {ratio}")]
    Construction { x: usize, y: usize, ratio: f64 },

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidInput(msg.into())
}
