use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Infeasible(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: line {line}: {message}", path.display())]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad input, 3 for infeasible parameters, 1 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Format { .. } => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io { .. } | CliError::Json(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<dpxattn_core::Error> for CliError {
    fn from(e: dpxattn_core::Error) -> Self {
        if e.is_infeasible() {
            CliError::Infeasible(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}
