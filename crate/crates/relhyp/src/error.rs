use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the stage that raises them:
/// input parsing, size guards, and geometric preconditions.
#[derive(Debug, Error)]
pub enum RelhypError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid group spec: {0}")]
    InvalidSpec(String),

    #[error("vertex cap exceeded: predicted {predicted} vertices, cap {cap}")]
    CapExceeded { predicted: u64, cap: u64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("empty vertex set: {0}")]
    EmptySet(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cover construction failed: {0}")]
    CoverFailure(String),

    #[error("model rejected: {0}")]
    ModelRejected(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RelhypError>;
