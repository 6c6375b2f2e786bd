use std::io;

use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("snapshot checksum mismatch (expected {expected:#010x}, found {found:#010x})")]
    Corruption { expected: u32, found: u32 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! dim_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Dimension(format!($($arg)*))
    };
}
pub(crate) use dim_err;
