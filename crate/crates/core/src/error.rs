use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate structure: {0}")]
    DegenerateStructure(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("kernel completion failed: {0}")]
    KernelCompletion(String),

    #[error("tensors belong to different tapes")]
    TapeMismatch,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
