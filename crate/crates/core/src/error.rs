use thiserror::Error;

use crate::features::Moments;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("signal length {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),

    #[error("degenerate current vector: magnitude {0:e} is below epsilon")]
    DegenerateVector(f64),

    /// The ratio-based indices are undefined for this window. The six
    /// moment statistics are still carried along.
    #[error("degenerate window: RMS or mean absolute value is zero")]
    DegenerateWindow { moments: Moments },

    #[error("feature width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported format version {found:?} (expected {expected})")]
    Version { found: String, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
