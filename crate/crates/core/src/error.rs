use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the pipeline can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch, left {left:?} vs right {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("backward called on `{layer}` before a recorded forward pass")]
    BackwardBeforeForward { layer: &'static str },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("sample `{sample}`: {msg}")]
    InvalidSample { sample: String, msg: String },

    #[error("duplicate sample id `{0}`")]
    DuplicateSample(String),

    #[error("{0}")]
    Data(String),

    #[error("model artifact: {0}")]
    Artifact(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed input data rather than configuration
    /// or numerics. The CLI maps this onto its exit codes.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::InvalidSample { .. }
            | Error::DuplicateSample(_)
            | Error::Data(_)
            | Error::Io { .. }
            | Error::Artifact(_) => true,
            Error::Fold { source, .. } => source.is_data_error(),
            _ => false,
        }
    }

    pub fn is_numeric_error(&self) -> bool {
        match self {
            Error::NonFiniteLoss { .. } => true,
            Error::Fold { source, .. } => source.is_numeric_error(),
            _ => false,
        }
    }
}
