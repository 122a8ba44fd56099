use thiserror::Error;

/// Errors raised by the estimators, diagnostics and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is not Hadamard invertible: entry ({row}, {col}) = {value}")]
    NotHadamardInvertible { row: usize, col: usize, value: f64 },

    #[error("effective rank is undefined for the zero matrix")]
    UndefinedErank,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("infeasible target: {0}")]
    InfeasibleTarget(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("schedule violation at block {block}, coordinate {coordinate}: probability {value} outside [{floor}, 1]")]
    ScheduleViolation {
        block: usize,
        coordinate: usize,
        value: f64,
        floor: f64,
    },

    #[error("insufficient samples: need at least {required}, got {found}")]
    InsufficientSamples { required: usize, found: usize },

    #[error(
        "mean correction not identifiable at pair ({row}, {col}): theta = 0 on an observed pair"
    )]
    NotIdentifiable { row: usize, col: usize },

    #[error("accumulator is empty")]
    EmptyAccumulator,

    #[error("no finite solution: {0}")]
    Overflow(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("numerical failure at {point}: {source}")]
    GridPoint {
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Process exit code used by the `misscov` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::GridPoint { .. } | Error::Calibration(_) => 3,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
