use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },

    #[error("point {index} has norm {norm} outside B(0, {radius})")]
    OutsideBall {
        index: usize,
        norm: f64,
        radius: f64,
    },

    #[error("label {label} at point {index} is not in [0, {k})")]
    LabelOutOfRange { index: usize, label: usize, k: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),

    #[error("codebook has coincident codepoints {0} and {1}")]
    DuplicateCodepoints(usize, usize),

    #[error("cell {0} is empty")]
    EmptyCell(usize),

    #[error("empirical risk minimizer has zero distortion; the initialization ratio is undefined")]
    ZeroErmDistortion,

    #[error("interval {interval} is split across Voronoi cells; exact integration unavailable")]
    SplitInterval { interval: usize },

    #[error("rejection sampler stalled after {0} consecutive rejections")]
    RejectionStall(u64),

    #[error("model does not expose {0}")]
    Unavailable(&'static str),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
