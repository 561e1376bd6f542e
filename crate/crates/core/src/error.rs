use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("record `{0}` not found")]
    MissingRecord(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("configuration rejected: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;
