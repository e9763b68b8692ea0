//! Error type shared by every module, with the CLI exit-code mapping.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid equilibrium: {0}")]
    InvalidEquilibrium(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("truncation error: {0}")]
    Truncation(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("infeasible constants: {0}")]
    Infeasible(String),
    #[error("fitting error: {0}")]
    Fitting(String),
    #[error("i/o error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// 1 validation, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Dimension(_) | Error::Argument(_) | Error::Truncation(_) | Error::Validation(_) => 1,
            Error::InvalidEquilibrium(_) | Error::Numerical(_) | Error::Infeasible(_) | Error::Fitting(_) => 2,
            Error::Io { .. } => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
