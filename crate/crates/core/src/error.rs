use thiserror::Error;

use crate::survey_model::ValidationReport;

pub type Result<T> = std::result::Result<T, BoundsError>;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("{file}: line {line}, column `{column}`: {message}")]
    Parse {
        file: String,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{file}: {message}")]
    Io { file: String, message: String },

    /// A record points at something that does not exist or may not be pointed at.
    #[error("{record}: {message}")]
    Integrity { record: String, message: String },

    #[error("dataset failed validation:\n{0}")]
    Validation(ValidationReport),

    /// An estimate is undefined because a cell (stratum, school, sample) is empty.
    #[error("{cell}: {message}")]
    EmptyCell { cell: String, message: String },

    /// The data contradict the maintained assumptions: the region is empty.
    #[error("{regime}: assumptions refuted by the data: {message}")]
    Refuted { regime: String, message: String },

    #[error("invalid weighted sample: {0}")]
    InvalidSample(String),

    #[error("student {student_id}: plausible value {index} is missing")]
    MissingPlausibleValue { student_id: String, index: usize },

    #[error("observed value {value} of student {student_id} lies outside the declared support [{min}, {max}]")]
    OutsideSupport {
        student_id: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl BoundsError {
    pub(crate) fn empty(cell: impl Into<String>, message: impl Into<String>) -> Self {
        BoundsError::EmptyCell {
            cell: cell.into(),
            message: message.into(),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        BoundsError::Config(message.into())
    }

    /// Stable process exit code for scripted pipelines.
    pub fn exit_code(&self) -> i32 {
        match self {
            BoundsError::Parse { .. }
            | BoundsError::Io { .. }
            | BoundsError::Integrity { .. }
            | BoundsError::Validation(_)
            | BoundsError::InvalidSample(_)
            | BoundsError::MissingPlausibleValue { .. }
            | BoundsError::OutsideSupport { .. } => 2,
            BoundsError::EmptyCell { .. } | BoundsError::Refuted { .. } => 3,
            BoundsError::Config(_) => 4,
        }
    }

    /// Short machine-readable tag used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            BoundsError::Parse { .. } => "parse",
            BoundsError::Io { .. } => "io",
            BoundsError::Integrity { .. } => "integrity",
            BoundsError::Validation(_) => "validation",
            BoundsError::EmptyCell { .. } => "empty_cell",
            BoundsError::InvalidSample(_) => "invalid_sample",
            BoundsError::Refuted { .. } => "refuted",
            BoundsError::MissingPlausibleValue { .. } => "missing_plausible_value",
            BoundsError::OutsideSupport { .. } => "outside_support",
            BoundsError::Config(_) => "config",
        }
    }
}
