use std::path::PathBuf;

/// Errors surfaced by every stage of the terrain pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value or spec is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation received input that violates its preconditions.
    #[error("input error: {0}")]
    Input(String),

    /// Training produced a non-finite loss.
    #[error("{stage} diverged at epoch {epoch} (non-finite loss)")]
    Diverged {
        stage: &'static str,
        epoch: usize,
        /// Serialized parameters from the last epoch with a finite loss.
        checkpoint: Vec<u8>,
    },

    /// A file on disk does not follow the expected format.
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
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

pub type Result<T> = std::result::Result<T, Error>;
