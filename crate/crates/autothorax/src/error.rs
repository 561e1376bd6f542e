use std::path::PathBuf;

/// Errors from file formats, IO and command orchestration.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] autothorax_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Manifest { line: u64, message: String },
    #[error("vector store: {0}")]
    Store(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("json {path}: {message}")]
    Json { path: PathBuf, message: String },
    /// Bad flags or configuration; maps to the usage exit code.
    #[error("{0}")]
    Usage(String),
    #[error("missing {what}: {path}")]
    Missing { what: &'static str, path: PathBuf },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for usage errors, 2 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Core(autothorax_core::Error::Config(_)) => 1,
            _ => 2,
        }
    }
}
