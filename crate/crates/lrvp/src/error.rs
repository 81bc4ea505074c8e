use std::path::{Path, PathBuf};

/// Errors surfaced by the file formats, pipeline and command line.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] lrvp_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Network(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// One-word category printed by the command line on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Core(e) => e.category(),
            Error::Io { .. } | Error::Csv(_) => "io",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
            Error::Network(_) => "network",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub(crate) fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
