use thiserror::Error;

use crate::empirical_bayes::FitResult;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("size error: {what} = {value} exceeds the configured cap {cap}")]
    Size {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    #[error("numerical integrity error: {0}")]
    NumericalIntegrity(String),

    #[error("method unavailable: {0}")]
    MethodUnavailable(String),

    /// The fit is still returned so callers can inspect the boundary flags.
    #[error("degenerate sample: {reason}")]
    DegenerateSample {
        reason: String,
        fit: Option<Box<FitResult>>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input")]
    EmptyInput,

    #[error("rejection sampler exceeded {0} iterations")]
    NonConvergence(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
