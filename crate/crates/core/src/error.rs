use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("out of supported range: {0}")]
    Range(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("unbounded objective: {0}")]
    Unbounded(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("jacobian rank collapse: {0}")]
    RankCollapse(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

pub type Result<T> = core::result::Result<T, Error>;
