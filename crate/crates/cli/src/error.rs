use cqsm_core::CqsmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    /// 2 validation, 3 non-convergence, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::NotConverged(_) => "not_converged",
            CliError::Internal(_) => "internal",
        }
    }
}

impl From<CqsmError> for CliError {
    fn from(e: CqsmError) -> Self {
        match e {
            CqsmError::InvalidParameter { .. }
            | CqsmError::HypothesisViolation(_)
            | CqsmError::Unsupported(_)
            | CqsmError::OutOfRange { .. } => CliError::Validation(e.to_string()),
            CqsmError::NotConverged(_) | CqsmError::Truncated(_) => {
                CliError::NotConverged(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
