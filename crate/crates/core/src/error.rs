use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure talking to an external model endpoint.
#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport failure calling {endpoint}: {cause}")]
    Transport { endpoint: String, cause: String },
    #[error("endpoint {endpoint} returned HTTP {status}")]
    Status { endpoint: String, status: u16 },
    #[error("endpoint {endpoint} sent an undecodable reply: {cause}")]
    Decode { endpoint: String, cause: String },
}

impl ClientError {
    /// Transport errors and 5xx replies may succeed on retry.
    pub fn is_retriable(&self) -> bool {
        match self {
            ClientError::Transport { .. } => true,
            ClientError::Status { status, .. } => *status >= 500 || *status == 429,
            ClientError::Decode { .. } => false,
        }
    }

    pub fn endpoint(&self) -> &str {
        match self {
            ClientError::Transport { endpoint, .. }
            | ClientError::Status { endpoint, .. }
            | ClientError::Decode { endpoint, .. } => endpoint,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error("unknown entity id `{0}`")]
    UnknownEntity(String),
    #[error("{what} index {index} out of range (len {len})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported format: {0}")]
    Format(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Client(#[from] ClientError),
}

impl Error {
    /// Short machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Record { .. } => "parse",
            Error::Invalid(_) | Error::UnknownEntity(_) | Error::OutOfRange { .. } => "data",
            Error::Dimension(_) => "model",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
            Error::Client(_) => "client",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
