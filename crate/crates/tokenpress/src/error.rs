use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::tensor::FormatError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: {what} is {found}, but {} implies {expected}", file.display(), reference.display())]
    DimensionMismatch {
        file: PathBuf,
        reference: PathBuf,
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{}: non-finite value at flat index {index}", file.display())]
    NonFiniteValue { file: PathBuf, index: usize },
    #[error("{}: key row {row} has zero norm", file.display())]
    ZeroKeyRow { file: PathBuf, row: usize },
    #[error("{}: {source}", file.display())]
    InvalidTensor {
        file: PathBuf,
        #[source]
        source: tokenpress_core::Error,
    },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: tokenpress_core::Error,
    },
    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, message: impl ToString) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn core(context: impl Into<String>, source: tokenpress_core::Error) -> Self {
        Error::Core {
            context: context.into(),
            source,
        }
    }

    /// Stable identifier for the error line printed by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::Format { source, .. } => source.kind(),
            Error::Parse { .. } => "ParseError",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::ZeroKeyRow { .. } => "ZeroKeyRow",
            Error::InvalidTensor { source, .. } | Error::Core { source, .. } => source.kind(),
            Error::InfeasibleSpec(_) => "InfeasibleSpec",
            Error::Usage(_) => "Usage",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
