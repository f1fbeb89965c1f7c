use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A probability vector, matrix or argument failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// Two objects that must agree on a dimension do not.
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Invalid configuration or topology request.
    #[error("config error: {0}")]
    Config(String),

    /// Data does not match what a model or quantizer expects.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The dense end-to-end matrix would exceed the configured row cap.
    #[error("state space too large: {required} joint input symbols required, cap is {cap}")]
    StateSpace { required: u128, cap: usize },

    #[error("model format version {found} is not supported (this build reads up to {supported})")]
    Version { found: u64, supported: u64 },

    #[error("checksum failure: {0}")]
    Checksum(String),

    #[error("serialization error: {0}")]
    Serde(String),

    /// A repeated-split experiment failed in one of its runs.
    #[error("run {run} failed: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (config, schema, missing files)
    /// rather than failures during computation.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Config(_) | Error::Io { .. } | Error::Parse { .. } | Error::Schema(_) => true,
            Error::Run { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}
