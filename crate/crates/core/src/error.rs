use thiserror::Error;

/// Errors raised by the field evaluators, operator assembly and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CqsmError {
    #[error("field is singular at the origin")]
    SingularPoint,
    #[error("radius {radius} lies outside the tabulated profile range [{min}, {max}]")]
    OutOfRange { radius: f64, min: f64, max: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("field evaluation failed at node {node} ({x:?}): {source}")]
    Assembly {
        node: usize,
        x: [f64; 3],
        #[source]
        source: Box<CqsmError>,
    },
    #[error("result truncated at {0} pairs; rerun with a larger max_pairs")]
    Truncated(usize),
    #[error("eigensolver did not converge: {0}")]
    NotConverged(String),
    #[error("dense linear algebra failed: {0}")]
    Dense(String),
}

pub type Result<T> = std::result::Result<T, CqsmError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> CqsmError {
    CqsmError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
