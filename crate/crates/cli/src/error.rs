use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("missing result files in {dir}: {}", missing.join(", "))]
    Missing { dir: PathBuf, missing: Vec<String> },
    #[error(transparent)]
    Core(#[from] recon_core::Error),
    #[error("{0} continuation stage(s) did not converge; partial results written")]
    NotConverged(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Missing { .. } => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
