use std::path::PathBuf;

use crate::linalg::SpectralSummary;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(&'static str),

    /// Power iteration did not settle; the last iterate is kept for diagnostics.
    #[error("power iteration did not converge after {iterations} iterations (last sigma1 = {})", .last.sigma1)]
    ConvergenceFailure {
        iterations: usize,
        last: Box<SpectralSummary>,
    },

    #[error("matrix {rows}x{cols} exceeds the dense SVD oracle limit of {limit}x{limit}")]
    OracleSizeExceeded { rows: usize, cols: usize, limit: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index {index} out of range for {what} of size {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("degenerate batch: {0}")]
    DegenerateBatch(&'static str),

    #[error("gradient angle undefined: {0} gradient is zero")]
    UndefinedAngle(&'static str),

    #[error("non-finite values at epoch {epoch}: {detail}")]
    Numeric { epoch: usize, detail: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration-class errors map to a usage failure at the command line.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}
