use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite parameter value at index {index}")]
    NonFinite { index: usize },

    #[error("label {label} at sample {index} is outside [0, {num_classes})")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("invalid model spec: {0}")]
    InvalidModelSpec(String),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("cannot split {samples} samples across {clients} clients")]
    TooManyClients { clients: usize, samples: usize },

    #[error("cannot select {requested} clients out of {available}")]
    InvalidSelection { requested: usize, available: usize },

    #[error("staleness threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),

    #[error("invalid aggregation input: {0}")]
    InvalidAggregation(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: line {line}, column `{column}`: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no data")]
    NoData,

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Exit code reported by the command-line front end: 1 for problems the
    /// user can fix (config, input files), 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Csv { .. }
            | Error::Io { .. }
            | Error::NoData
            | Error::EmptyDataset
            | Error::TooManyClients { .. }
            | Error::InvalidSelection { .. }
            | Error::InvalidThreshold(_)
            | Error::InvalidModelSpec(_)
            | Error::InvalidHyperparams(_) => 1,
            _ => 2,
        }
    }
}
