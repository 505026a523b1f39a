//! Error type shared across the engine.

use crate::calendar::MonthKey;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row that cannot be parsed; `line` is 1-based and counts the header.
    #[error("{path}:{line}: {msg}")]
    MalformedRow { path: PathBuf, line: u64, msg: String },

    #[error("duplicate cell for stock {stock} at {month}")]
    DuplicateCell { stock: String, month: MonthKey },

    #[error("stock {stock} at {month}: return {value} is <= -1")]
    InvalidReturn { stock: String, month: MonthKey, value: f64 },

    #[error("stock {stock} on {date}: negative volume {volume}")]
    NegativeVolume { stock: String, date: chrono::NaiveDate, volume: f64 },

    #[error("stock {stock}: date {date} is not after the previous row")]
    OutOfOrderDates { stock: String, date: chrono::NaiveDate },

    #[error("no input rows survived validation in {path}")]
    EmptyInput { path: PathBuf },

    #[error("month axes do not overlap")]
    EmptyIntersection,

    #[error("{month}: only {got} eligible stocks, need at least {needed}")]
    TooFewEligible { month: MonthKey, needed: usize, got: usize },

    /// Eligibility guaranteed a holding return that turned out missing.
    #[error("internal: stock {stock} missing holding return at {month}")]
    MissingHoldingReturn { stock: String, month: MonthKey },

    #[error("series is constant; variance is zero")]
    ConstantSeries,

    #[error("need at least {required} observations, got {actual}")]
    TooFewObservations { required: usize, actual: usize },

    #[error("design matrix is rank deficient: column {column} is collinear")]
    RankDeficient { column: String },

    #[error("regime is degenerate: all raw values are tied at the median")]
    DegenerateRegime,

    #[error("regime split has an empty {bucket} bucket")]
    EmptyBucket { bucket: &'static str },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::MalformedRow { path: path.into(), line, msg: msg.into() }
    }
}
