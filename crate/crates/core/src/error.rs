use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("no reference points")]
    NoReferencePoints,
    #[error("sample larger than population: requested {requested}, have {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid box: sizes must be positive, got {0:?}")]
    InvalidBox([f64; 3]),
    #[error("probability out of range at index {index}: {value}")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("lane panicked: {0}")]
    LanePanic(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
