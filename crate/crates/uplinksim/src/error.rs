use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid scenario:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{} already exists (pass --force to overwrite)", .0.display())]
    WouldOverwrite(PathBuf),
    #[error("malformed {}: {message}", path.display())]
    Malformed { path: PathBuf, message: String },
    #[error("internal invariant breach: {0}")]
    Internal(String),
}

impl CliError {
    /// 0 success, 2 configuration, 3 I/O, 4 internal invariant breach.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => 2,
            CliError::Io { .. } | CliError::Csv { .. } | CliError::WouldOverwrite(_) | CliError::Malformed { .. } => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
