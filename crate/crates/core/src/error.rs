use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("operation `{0}` is not differentiable at this point")]
    NotDifferentiable(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("degenerate component {0}: no skeleton pixels")]
    DegenerateComponent(usize),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("malformed label at line {line}: {reason}")]
    MalformedLabel { line: usize, reason: String },
    #[error("value out of range at line {line}: {reason}")]
    OutOfRange { line: usize, reason: String },
    #[error("malformed prediction at line {line}: {reason}")]
    MalformedPrediction { line: usize, reason: String },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image: {0}")]
    CorruptImage(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidShape(msg.into()))
}
