//! Crate-wide error type with CLI exit-code mapping.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad run parameters or config file contents.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input data, with file position where known.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Input data that parses but is inconsistent (e.g. one firm, two sectors).
    #[error("data integrity error: {0}")]
    Integrity(String),

    /// Generic data-level failure (missing artifacts, empty inputs, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// No eligible swap pair exists within the resample budget.
    #[error("no eligible link pair found after {attempts} attempts")]
    SwapExhausted { attempts: usize },

    /// A proposal applied or reverted against a network it was not built for.
    #[error("stale swap proposal: network version {actual}, expected {expected}")]
    StaleProposal { expected: u64, actual: u64 },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Parse { .. } | Error::Integrity(_) | Error::Data(_) => 3,
            Error::Io { .. } | Error::SwapExhausted { .. } | Error::StaleProposal { .. } => 4,
        }
    }
}
