use std::path::PathBuf;

use crate::catalog::ShapeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate path: {0}")]
    DegeneratePath(&'static str),

    #[error("degenerate bounding box {width:.3}x{height:.3} (minimum dimension {min})")]
    DegenerateBBox { width: f64, height: f64, min: f64 },

    #[error("trace has {got} samples, at least {min} required")]
    InsufficientSamples { got: usize, min: usize },

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("point count mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("value {0} outside [0, 1]")]
    Range(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invariant violation ({subject}): {rule}")]
    InvariantViolation { subject: String, rule: String },

    #[error("no training traces for shapes {}", format_ids(.0))]
    MissingShape(Vec<ShapeId>),

    #[error("normalizing training trace for shape {shape}: {source}")]
    TrainingTrace {
        shape: ShapeId,
        #[source]
        source: Box<Error>,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("{samples} samples cannot fill {folds} folds")]
    TooFewSamples { samples: usize, folds: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown user {0:?}")]
    UnknownUser(String),

    #[error("session already decided")]
    SessionOrder,

    #[error("session has {0} of 3 frames")]
    SessionIncomplete(usize),

    #[error("too soon after the previous attempt")]
    RateLimited,

    #[error("locked out")]
    LockedOut,

    #[error("storage failure at {path}: {message}")]
    StorageFailure { path: PathBuf, message: String },

    #[error("not found: {0}")]
    NotFound(String),
}

impl Error {
    pub(crate) fn invariant(subject: impl Into<String>, rule: impl Into<String>) -> Self {
        Error::InvariantViolation {
            subject: subject.into(),
            rule: rule.into(),
        }
    }

    pub(crate) fn storage(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::StorageFailure {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// Short stable identifier, used by the CLI and the wire protocol.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DegeneratePath(_) => "degenerate_path",
            Error::DegenerateBBox { .. } => "degenerate_bbox",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::InvalidTrace(_) => "invalid_trace",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Range(_) => "range",
            Error::Parse(_) => "parse",
            Error::InvariantViolation { .. } => "invariant_violation",
            Error::MissingShape(_) => "missing_shape",
            Error::TrainingTrace { .. } => "training_trace",
            Error::EmptyDataset => "empty_dataset",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::Config(_) => "config",
            Error::UnknownUser(_) => "unknown_user",
            Error::SessionOrder => "session_order",
            Error::SessionIncomplete(_) => "session_incomplete",
            Error::RateLimited => "rate_limited",
            Error::LockedOut => "locked_out",
            Error::StorageFailure { .. } => "storage_failure",
            Error::NotFound(_) => "not_found",
        }
    }
}

fn format_ids(ids: &[ShapeId]) -> String {
    ids.iter()
        .map(|id| id.as_str())
        .collect::<Vec<_>>()
        .join(",")
}
