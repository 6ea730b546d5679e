use thiserror::Error;

/// Errors raised by code construction, decoding and the neural model.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("block length {0} is not a power of two")]
    InvalidBlockLength(usize),

    #[error("information length {k} out of range for block length {n}")]
    InvalidInfoLength { k: usize, n: usize },

    #[error("invalid information set: {0}")]
    InvalidInfoSet(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("flip index {0} is not an information position")]
    FlipNotInfo(usize),

    #[error("flip set is non-empty but no previous estimate was supplied")]
    MissingEstimate,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("weight file: {0}")]
    WeightFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
