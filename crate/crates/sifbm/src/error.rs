use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing input artifact {0}; run the producing command first")]
    MissingArtifact(PathBuf),
    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },
    #[error(transparent)]
    Core(#[from] sifbm_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub(crate) fn format(what: &'static str, msg: impl ToString) -> Self {
        CliError::Format { what, msg: msg.to_string() }
    }
}
