//! Error type for IO, parsing, and command-level failures.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    Core(convtext_core::Error),
    Io(std::io::Error),
    /// A named file with a 1-based line number and a description.
    Format {
        path: String,
        line: usize,
        message: String,
    },
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Core(e) => write!(f, "{e}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Format {
                path,
                line,
                message,
            } => write!(f, "{path}:{line}: {message}"),
            Error::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<convtext_core::Error> for Error {
    fn from(e: convtext_core::Error) -> Self {
        Error::Core(e)
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl Error {
    pub fn format(path: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
