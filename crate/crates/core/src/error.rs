use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad image {path}: {reason}")]
    BadImage { path: PathBuf, reason: String },

    #[error("corpus root {0} does not exist")]
    MissingRoot(PathBuf),

    #[error("empty class: {0}")]
    EmptyClass(String),

    #[error("class too small to stratify: {class} has {size} records, needs at least {required}")]
    ClassTooSmall {
        class: String,
        size: usize,
        required: usize,
    },

    #[error("unknown label: {0}")]
    UnknownLabel(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite gradient at component {0}")]
    NonFiniteGradient(usize),

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("parse error in {what} at line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trainer failed at epoch {epoch}: {source}")]
    Trainer {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            what,
            line,
            message: message.into(),
        }
    }

    /// Short machine-readable kind, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::BadImage { .. } => "bad_image",
            Error::MissingRoot(_) => "missing_root",
            Error::EmptyClass(_) => "empty_class",
            Error::ClassTooSmall { .. } => "class_too_small",
            Error::UnknownLabel(_) => "unknown_label",
            Error::InvalidMetric(_) => "invalid_metric",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFiniteGradient(_) => "non_finite_gradient",
            Error::EmptyMatrix => "empty_matrix",
            Error::Empty(_) => "empty",
            Error::Parse { .. } => "parse",
            Error::Checkpoint(_) => "checkpoint",
            Error::Config(_) => "config",
            Error::Trainer { .. } => "trainer",
            Error::Json(_) => "json",
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
