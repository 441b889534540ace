use thiserror::Error;

/// Errors produced by the learners and the test engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke a shape or index contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration value is outside its documented range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged in {context}{}", iteration.map(|i| format!(" at iteration {i}")).unwrap_or_default())]
    Divergence {
        context: String,
        iteration: Option<usize>,
    },

    /// A standardized statistic had zero variance with a nonzero mean.
    #[error("degenerate variance for transform {index}: mean {mean} with zero standard error")]
    DegenerateVariance { index: usize, mean: f64 },

    /// Input data could not be parsed.
    #[error("ingestion error at line {line}: {message}")]
    Ingest { line: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn divergence(context: impl Into<String>, iteration: Option<usize>) -> Self {
        Error::Divergence {
            context: context.into(),
            iteration,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
