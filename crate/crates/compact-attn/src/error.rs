use std::path::PathBuf;

use compact_attn_core::Error as CoreError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{}:{line}: {source}", path.display())]
    JsonLine { path: PathBuf, line: usize, source: serde_json::Error },

    /// A file decoded but its contents are invalid (bad `CTF1` bytes,
    /// inconsistent mesh, too few landmarks, ...).
    #[error("{}: {source}", path.display())]
    Data { path: PathBuf, source: CoreError },

    #[error(transparent)]
    Core(#[from] CoreError),

    /// Arguments that parse but cannot be used together.
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, source: CoreError) -> Self {
        Error::Data { path: path.into(), source }
    }

    /// Process exit status for this error: 1 for usage problems, 2 for
    /// anything wrong with the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            _ => 2,
        }
    }
}
