use thiserror::Error;

/// Errors produced by the LPPLS pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },

    #[error("row {row}: date {date} does not follow the previous date {previous}")]
    DateOrder {
        row: usize,
        date: String,
        previous: String,
    },

    #[error("csv: {0}")]
    Csv(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate linear basis (condition estimate {condition:.3e})")]
    DegenerateBasis { condition: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error(
        "insufficient history: endpoint {t2} needs {needed} points, only {available} available"
    )]
    InsufficientHistory {
        t2: usize,
        needed: usize,
        available: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
