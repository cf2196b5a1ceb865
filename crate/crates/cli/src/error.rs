use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("configuration: {0}")]
    Config(String),

    /// Artifacts estimated under a different configuration.
    #[error("{0} (pass --force to use it anyway)")]
    HashMismatch(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        source: wismc::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn core(context: impl Into<String>, source: wismc::Error) -> Self {
        CliError::Core {
            context: context.into(),
            source,
        }
    }

    /// 1 for validation and insufficient data, 2 for I/O and configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Config(_) => 2,
            CliError::HashMismatch(_) => 1,
            CliError::Core { source, .. } => match source {
                wismc::Error::Io(_) | wismc::Error::Json(_) | wismc::Error::Parse { .. } | wismc::Error::Artifact(_) => 2,
                _ => 1,
            },
        }
    }
}

/// Attaches a context string to core results.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for wismc::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::core(what(), e))
    }
}
