use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] wgqed::Error),

    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn key(key: &str, reason: impl std::fmt::Display) -> Self {
        CliError::Config(format!("`{key}`: {reason}"))
    }

    /// 2 for configuration and parameter errors, 3 for numerical
    /// non-convergence, 1 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(wgqed::Error::NonConvergence(_)) => 3,
            CliError::Model(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}
