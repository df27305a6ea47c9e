use thiserror::Error;

/// Errors produced by the numerical routines and the file formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range for {len} classes")]
    Index { index: usize, len: usize },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix that must be positive semi-definite is not, beyond round-off.
    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e}, max {max_eigenvalue:e})")]
    NotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    /// An iterative solver ran out of its iteration budget.
    #[error("{routine} did not converge within {iterations} iterations")]
    Convergence {
        routine: &'static str,
        iterations: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("misaligned inputs: {left} predictions vs {right} labels")]
    Misaligned { left: usize, right: usize },

    #[error("unsupported class count {0} (only K = 3 is supported)")]
    UnsupportedK(usize),

    #[error("histogram binning mismatch: {0}")]
    BinningMismatch(String),

    /// Malformed input file contents.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),

    /// An error attributed to one input record.
    #[error("record {id}: {source}")]
    Record { id: String, source: Box<Error> },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// True for errors caused by well-formed input that has no valid image
    /// (as opposed to malformed input).
    pub fn is_domain(&self) -> bool {
        match self {
            Error::Domain(_) | Error::NotPsd { .. } | Error::Convergence { .. } => true,
            Error::Record { source, .. } => source.is_domain(),
            _ => false,
        }
    }

    pub(crate) fn in_record(self, id: &str) -> Self {
        Error::Record {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
