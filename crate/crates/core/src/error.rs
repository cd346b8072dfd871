use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("non-binary label {value:?} on data line {line}")]
    NonBinaryLabel { line: usize, value: String },

    #[error("unparseable value {value:?} in column {column:?} on data line {line}")]
    BadValue {
        line: usize,
        column: String,
        value: String,
    },

    #[error("no failure rows remain after cleaning")]
    NoMinority,

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("fractions do not sum to 1 (sum = {0})")]
    SplitFractions(f64),

    #[error("class {class} has {count} samples, need at least {needed}")]
    TooFewSamples {
        class: u8,
        count: usize,
        needed: usize,
    },

    #[error("training set contains a single class")]
    SingleClass,

    #[error("feature width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown or malformed technique: {0}")]
    Technique(String),

    #[error("training diverged: {0}")]
    Diverged(String),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Technique(_)
            | Error::SplitFractions(_)
            | Error::Schema(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
