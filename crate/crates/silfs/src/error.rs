use thiserror::Error;

/// Library-wide error type.
///
/// The CLI maps variants onto process exit codes: `InvalidArgument` → 2,
/// `Data`/`Io` → 3, `Numerical`/`Selection` → 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("selection failure: {0}")]
    Selection(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
