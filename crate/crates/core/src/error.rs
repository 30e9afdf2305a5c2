use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("{}:{line}: {message}", path.display())]
    Validation {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}:{line}: parse error: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("degenerate kernel: sum of K(j/k) over j=1..k is zero")]
    DegenerateKernel,

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("index {index} is below the validity threshold {threshold} of the expansion")]
    Validity { index: usize, threshold: usize },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
