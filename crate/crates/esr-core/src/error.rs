//! Crate-wide error type.

use std::fmt;
use std::io;
use std::path::PathBuf;

#[derive(Debug)]
pub enum Error {
    /// Underlying I/O failure.
    Io(io::Error),
    /// A text file failed to parse; `line` is 1-based.
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    /// A domain invariant or precondition was violated.
    Invalid(String),
    /// Tensor or layer shapes are inconsistent.
    Shape(String),
    /// Bad or contradictory configuration.
    Config(String),
    /// A required input (file, run directory, checkpoint) is absent.
    Missing(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(e) => write!(f, "i/o error: {e}"),
            Self::Parse { path, line, msg } => {
                write!(f, "parse error: {}:{line}: {msg}", path.display())
            }
            Self::Invalid(s) => write!(f, "invalid: {s}"),
            Self::Shape(s) => write!(f, "shape error: {s}"),
            Self::Config(s) => write!(f, "config error: {s}"),
            Self::Missing(s) => write!(f, "missing: {s}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        if let Self::Io(e) = self {
            Some(e)
        } else {
            None
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
