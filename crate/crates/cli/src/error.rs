use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot herald: {0}")]
    HeraldImpossible(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::HeraldImpossible(_) => 3,
            Self::Invariant(_) => 4,
        }
    }

    pub fn json(path: &Path, err: &serde_json::Error) -> Self {
        Self::Config(format!(
            "{}: line {}, column {}: {err}",
            path.display(),
            err.line(),
            err.column()
        ))
    }

    pub fn io(path: &Path, err: &std::io::Error) -> Self {
        Self::Config(format!("{}: {err}", path.display()))
    }
}

impl From<qfp_herald::Error> for CliError {
    fn from(err: qfp_herald::Error) -> Self {
        match err {
            qfp_herald::Error::HeraldImpossible { .. } => Self::HeraldImpossible(err.to_string()),
            _ => Self::Config(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
