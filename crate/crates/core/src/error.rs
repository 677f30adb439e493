use thiserror::Error;

/// Errors raised by the solver, bound and inference routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("unsupported derivative order: {0} tracked inputs (at most 2)")]
    UnsupportedOrder(usize),
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("training diverged at epoch {epoch}: {what}")]
    Diverged { epoch: usize, what: String },
    #[error("point {x} lies outside [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },
    #[error("matrix not numerically positive definite (pivot {pivot} = {value:e}, size {size})")]
    Conditioning { pivot: usize, value: f64, size: usize },
    #[error("solution undefined at {x}: {reason}")]
    Singular { x: f64, reason: String },
    #[error("weights file: {0}")]
    Parse(String),
    #[error("{}: {source}", path.display())]
    File { path: std::path::PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Adapter for `map_err` that attaches the offending path to an IO error.
    pub fn at_path(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Error::File { path: path.to_path_buf(), source }
    }
}
