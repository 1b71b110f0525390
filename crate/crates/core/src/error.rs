use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("not identifiable: {0}")]
    Identifiability(String),
    #[error("empty window: {0}")]
    EmptyWindow(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model rollout diverged at horizon step {step}")]
    RolloutDiverged { step: usize },
    #[error("singular mass matrix (condition number {0:.3e})")]
    SingularMassMatrix(f64),
    #[error("model file: {0}")]
    ModelFormat(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(CoreError::Dimension {
            context,
            expected,
            got,
        });
    }
    Ok(())
}
