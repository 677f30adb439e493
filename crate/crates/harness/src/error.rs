use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: pinnuq::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

impl HarnessError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn stage(stage: &'static str) -> impl FnOnce(pinnuq::Error) -> Self {
        move |source| HarnessError::Stage { stage, source }
    }

    pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| HarnessError::Io { path: path.to_path_buf(), source }
    }

    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 1 for IO.
    pub fn exit_code(&self) -> i32 {
        use pinnuq::Error as E;
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Stage { source, .. } => match source {
                E::Config(_) | E::Shape { .. } | E::Parse(_) => 2,
                E::Diverged { .. }
                | E::Conditioning { .. }
                | E::Singular { .. }
                | E::Domain { .. }
                | E::UnsupportedOrder(_)
                | E::Internal(_) => 3,
                E::File { .. } | E::Io(_) | E::Json(_) => 1,
            },
            HarnessError::Io { .. } | HarnessError::Json(_) => 1,
        }
    }
}
