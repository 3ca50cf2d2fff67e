use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{context}: {reason}")]
    InvalidInput { context: String, reason: String },

    #[error("mass mismatch: source mass {plus} differs from sink mass {minus}")]
    MassMismatch { plus: f64, minus: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph contains a directed cycle")]
    Cyclic,

    #[error("not a cycle of the graph: {0}")]
    NotACycle(String),

    #[error("fibres {0} and {1} overlap without sharing a canonical segment")]
    NonCanonicalOverlap(usize, usize),

    #[error("fibre {0} has a loop")]
    PatternHasLoop(usize),

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(context: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput { context: context.into(), reason: reason.into() }
    }
}
