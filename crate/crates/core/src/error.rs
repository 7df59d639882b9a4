use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index out of range: {what} {index} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("cell (arm {arm}, subpop {subpop}) has no observations")]
    UninitializedCell { arm: usize, subpop: usize },

    #[error("case requires empty feasible set")]
    FeasibleSetNotEmpty,

    #[error("case requires a best feasible arm")]
    NoFeasibleArm,

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("unknown strategy `{0}` (expected tascs, tas or uniform)")]
    UnknownStrategy(String),

    #[error("unknown example id {0} (expected 1 or 2)")]
    UnknownExample(u32),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
