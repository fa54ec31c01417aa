use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Load { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid record reference: file {file}, index {index}")]
    DanglingRecord { file: usize, index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible synthetic specification: {0}")]
    Infeasible(String),

    #[error("{0}")]
    Domain(String),
}

impl Error {
    pub fn load(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
