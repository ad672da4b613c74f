use std::path::PathBuf;

use narrative_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error("{context}: {source}")]
    Core { context: String, source: CoreError },
}

impl CliError {
    /// 2 for configuration problems, 3 for bad or missing data, 4 for
    /// numerical aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core { source, .. } => match source {
                CoreError::Config(_) => 2,
                CoreError::Divergence { .. } | CoreError::DegenerateEvidence => 4,
                _ => 3,
            },
            CliError::Format { .. } | CliError::Io { .. } | CliError::Data(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Attaches a description of the step that failed to core errors.
pub trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, CoreError> {
    fn context(self, what: impl Into<String>) -> Result<T> {
        self.map_err(|source| CliError::Core {
            context: what.into(),
            source,
        })
    }
}
