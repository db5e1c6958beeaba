use thiserror::Error;

/// Errors raised by dataset construction, training, queries, algebra and persistence.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid volume {0}: must be positive and finite")]
    InvalidVolume(f64),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset is empty or has zero total weight")]
    EmptyDataset,

    #[error("point {index} lies outside the explicit root box")]
    PointOutsideBox { index: usize },

    #[error("invalid slice: {0}")]
    InvalidSlice(String),

    #[error("slice fixes every dimension; use point evaluation instead")]
    NoFreeDimensions,

    #[error("no support: {0}")]
    NoSupport(String),

    #[error("negative scale factor {0}")]
    NegativeScale(f64),

    #[error("operation produced a negative leaf value {0}")]
    NegativeValue(f64),

    #[error("incompatible support: {0}")]
    IncompatibleSupport(String),

    #[error("inconsistent ratio: numerator {numerator} over zero denominator")]
    InconsistentRatio { numerator: f64 },

    #[error("unknown dimension '{0}'")]
    UnknownDimension(String),

    #[error("parse error at row {row}, column '{column}': {reason}")]
    ParseError {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("negative weight {value} at row {row}")]
    NegativeWeight { row: usize, value: f64 },

    #[error("unsupported tree file version '{0}'")]
    UnsupportedVersion(String),

    #[error("corrupt tree file: {0}")]
    CorruptFile(String),

    #[error("i/o failure: {0}")]
    IoFailure(String),
}

pub type Result<T> = std::result::Result<T, DetError>;

impl From<std::io::Error> for DetError {
    fn from(e: std::io::Error) -> Self {
        DetError::IoFailure(e.to_string())
    }
}
