use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("inconsistent dataset: input on line {first_line} and line {second_line} are identical but carry labels {first_label} and {second_label}")]
    Consistency {
        first_line: usize,
        second_line: usize,
        first_label: u8,
        second_label: u8,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in layer {layer}{}", epoch.map(|e| format!(" at epoch {e}")).unwrap_or_default())]
    Numerical { layer: usize, epoch: Option<u64> },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: offset {offset}: {message}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("incomplete trace in {}: {message}", dir.display())]
    Incomplete { dir: PathBuf, message: String },

    #[error("refusing to write into non-empty directory {}", .0.display())]
    DirectoryNotEmpty(PathBuf),

    #[error("literal noise scaling needs a nonnegative layer maximum, got {max}; use quadratic scaling")]
    ScalingMode { max: f64 },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Attach an epoch to a numerical error raised without one.
    pub(crate) fn at_epoch(self, epoch: u64) -> Self {
        match self {
            Error::Numerical { layer, epoch: None } => Error::Numerical {
                layer,
                epoch: Some(epoch),
            },
            other => other,
        }
    }
}
