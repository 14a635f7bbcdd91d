use thiserror::Error;

use crate::model::EnvProperty;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("signal property {signal} does not match requirement property {requirement}")]
    PropertyMismatch {
        signal: EnvProperty,
        requirement: EnvProperty,
    },

    #[error("signal does not cover window")]
    WindowNotCovered,

    #[error("requirement window has zero length")]
    EmptyWindow,

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("malformed range [{lo}, {hi}]")]
    MalformedRange { lo: f64, hi: f64 },

    #[error("invalid interval: start {start} is after end {end}")]
    InvalidInterval { start: i64, end: i64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no samples")]
    NoSamples,

    #[error("at least two intervals are required, got {0}")]
    TooFewIntervals(usize),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("unknown environment property `{0}`")]
    UnknownProperty(String),

    #[error("no room context for location `{0}`")]
    UnknownLocation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
