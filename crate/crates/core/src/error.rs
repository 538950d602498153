use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid search problem: {0}")]
    InvalidProblem(String),

    #[error(
        "not enough eligible entity pairs: requested train={requested:?} \
         but only train={achieved:?} could be assigned ({eligible} eligible pairs)"
    )]
    Shortfall {
        requested: [usize; 3],
        achieved: [usize; 3],
        eligible: usize,
    },

    #[error("training diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed artifact {path}: {message}")]
    Artifact { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn artifact(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Artifact {
            path: path.into(),
            message: msg.into(),
        }
    }

    /// True for errors caused by bad input data rather than bad settings.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::DuplicateDocument(_)
                | Error::InvalidProblem(_)
                | Error::Shortfall { .. }
                | Error::Io { .. }
                | Error::Artifact { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
