//! Error type shared by every pipeline stage.

use std::path::PathBuf;

use crate::translator::LossBreakdown;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("unsupported upsample from {from_hz} Hz to {to_hz} Hz")]
    UnsupportedUpsample { from_hz: f64, to_hz: f64 },

    #[error("failed to load subject {subject} from {}: {reason}", file.display())]
    Load {
        subject: String,
        file: PathBuf,
        reason: String,
    },

    #[error("format error in {}: {reason}", file.display())]
    Format { file: PathBuf, reason: String },

    #[error("training diverged at epoch {epoch}: non-finite loss {breakdown:?}")]
    Divergence {
        epoch: usize,
        breakdown: LossBreakdown,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Divergence,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Argument(_) | Error::Range(_) | Error::UnsupportedUpsample { .. } => {
                ErrorKind::Usage
            }
            Error::Load { .. } | Error::Format { .. } => ErrorKind::Data,
            Error::Divergence { .. } => ErrorKind::Divergence,
            Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
