use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the admissible range of the model.
    #[error("invalid {field}: {reason}")]
    Domain { field: &'static str, reason: String },

    /// The quadrature grid does not capture the field well enough to be trusted.
    #[error("quadrature diagnostic: {0}")]
    Diagnostic(String),

    #[error("unknown figure id `{0}` (expected fig2, fig3, fig4 or fig5)")]
    UnknownFigure(String),

    #[error("sweep point {index} ({point}) failed: {source}")]
    SweepPoint {
        index: usize,
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }

    /// True for I/O failures, which the command-line tool maps to a distinct exit code.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::SweepPoint { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
