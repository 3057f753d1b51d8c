use thiserror::Error;

/// Errors raised across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("insufficient history: need t >= {needed}, got t = {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("incompatible format version: found {found}, supported {supported}")]
    Version { found: u32, supported: u32 },

    #[error("dimension mismatch between model {model} and dataset {dataset}")]
    Dimension { model: String, dataset: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(expected: impl ToString, actual: impl ToString) -> Error {
    Error::Shape {
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
