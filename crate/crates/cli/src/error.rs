use std::path::{Path, PathBuf};

use prt_core::ErrorKind;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] prt_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("invalid config {}: {reason}", path.display())]
    Config { path: PathBuf, reason: String },

    #[error("bad signal file {}: {reason}", path.display())]
    Signal { path: PathBuf, reason: String },

    /// Run finished but some of it failed (divergence, aborted folds).
    #[error("{0}")]
    Incomplete(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => EXIT_USAGE,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Divergence => EXIT_DIVERGENCE,
                ErrorKind::Io => EXIT_IO,
            },
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Signal { .. } => EXIT_DATA,
            CliError::Incomplete(_) => EXIT_DIVERGENCE,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}
