use std::path::PathBuf;

use crate::dataset::Interaction;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("interaction (user {}, item {}) not found", .0.user, .0.item)]
    InteractionNotFound(Interaction),

    #[error("{0} not found")]
    NotFound(String),

    #[error("index {index} out of range for {what} (size {len})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("infeasible capacity: {units} units cannot fit in {shards} shards of capacity {capacity} (need t >= {required})")]
    InfeasibleCapacity {
        units: usize,
        shards: usize,
        capacity: usize,
        required: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// Short category tag used for CLI messages.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } | Error::Format { .. } => "parse",
            Error::EmptyDataset => "data",
            Error::InteractionNotFound(_) | Error::NotFound(_) => "not-found",
            Error::OutOfRange { .. } | Error::DimensionMismatch { .. } => "shape",
            Error::InfeasibleCapacity { .. } | Error::InvalidConfig(_) => "config",
            Error::NonFinite(_) => "numeric",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code for the CLI; 0 is reserved for success.
    pub fn exit_code(&self) -> u8 {
        match self.category() {
            "io" => 2,
            "parse" => 3,
            "config" => 4,
            "not-found" => 5,
            "shape" => 6,
            "numeric" => 7,
            _ => 1,
        }
    }
}
