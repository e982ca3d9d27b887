use std::path::PathBuf;

/// Errors raised by the library. Each variant maps to one failure class so
/// callers (the CLI, the C bindings) can report a distinct diagnostic.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller violated an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// Input data was non-finite or otherwise unusable.
    #[error("data error: {0}")]
    Data(String),

    /// A configuration value broke one of its invariants.
    #[error("invalid config: {0}")]
    Config(String),

    /// Vector or matrix shapes disagree.
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("ill-conditioned normal equations: {0}")]
    Conditioning(String),

    #[error("cannot normalize metrics: {0}")]
    Normalization(String),

    #[error("expert collided in episode {episode} (environment seed {seed})")]
    ExpertCollision { episode: usize, seed: u64 },

    /// A persisted file failed to parse or validate.
    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_dim(what: &str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            what: what.to_string(),
            expected,
            actual,
        })
    }
}
