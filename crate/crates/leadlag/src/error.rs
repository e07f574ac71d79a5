use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("non-positive price {value} for symbol {symbol} at row {row}")]
    NonPositivePrice {
        symbol: String,
        row: usize,
        value: f64,
    },

    #[error("duplicate entry for (timestamp {timestamp}, symbol {symbol})")]
    DuplicateEntry { timestamp: String, symbol: String },

    #[error("no symbol has complete data; nothing to ingest")]
    EmptyInput,

    #[error("trading day {day} has {rows} rows, need more than {required}")]
    DayTooShort {
        day: i64,
        rows: usize,
        required: usize,
    },

    #[error("every trading day is shorter than lag {lambda} + 1; lagged pair is empty")]
    EmptyLaggedPair { lambda: usize },

    #[error("insufficient data: series of length {n} cannot fill {q} quantile bins")]
    InsufficientData { n: usize, q: usize },

    #[error("empty series")]
    EmptySeries,

    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("column {column} is constant; correlation undefined")]
    ConstantColumn { column: String },

    #[error("invalid alphabet size or sample size: {msg}")]
    InvalidNullParams { msg: String },

    #[error("numerical error: {msg}")]
    Numerical { msg: String },

    #[error("node sets differ; networks are not comparable")]
    NodeSetMismatch,

    #[error("invalid synthetic spec: {msg}")]
    InvalidSpec { msg: String },

    #[error("zero variance in sample; pass an explicit bandwidth")]
    ZeroVariance,

    #[error("{msg}")]
    InvalidArgument { msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
