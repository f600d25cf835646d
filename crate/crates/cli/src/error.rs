use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

impl PartialEq for CliError {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (CliError::Parse(a), CliError::Parse(b)) | (CliError::Validation(a), CliError::Validation(b)) => a == b,
            (CliError::Io { path: a, source: x }, CliError::Io { path: b, source: y }) => a == b && x.kind() == y.kind(),
            _ => false,
        }
    }
}

impl From<gl_lab::Error> for CliError {
    fn from(e: gl_lab::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}
