use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample {index} is not finite ({value})")]
    NonFiniteSample { index: usize, value: f64 },

    #[error("window plan needs {required} samples but the record has {available}")]
    PlanTooLarge { required: usize, available: usize },

    #[error("line {line}: cannot parse `{content}` as a number")]
    Parse { line: usize, content: String },

    #[error("input contains no samples")]
    EmptyInput,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{context} requires M >= {required} windows, got M = {found}")]
    TooFewWindows {
        context: &'static str,
        required: usize,
        found: usize,
    },

    #[error("frequency bin {bin} out of range for window length {window_len}")]
    BinOutOfRange { bin: usize, window_len: usize },

    #[error("{0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
