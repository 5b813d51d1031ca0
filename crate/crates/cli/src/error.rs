use std::path::{Path, PathBuf};

/// Failure classes, each mapped to a process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation or configuration.
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// The inputs were readable but the operation failed on their content.
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) | CliError::Io { .. } => 2,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn domain(e: impl std::fmt::Display) -> CliError {
        CliError::Domain(e.to_string())
    }
}

impl From<covpref::curation::CurationError> for CliError {
    fn from(e: covpref::curation::CurationError) -> Self {
        use covpref::curation::CurationError as E;
        match e {
            E::Io { path, source } => CliError::Io { path, source },
            E::InvalidConfig { .. } => CliError::Usage(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<covpref::policy::PolicyError> for CliError {
    fn from(e: covpref::policy::PolicyError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<covpref::trainer::TrainError> for CliError {
    fn from(e: covpref::trainer::TrainError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<covpref::eval::EvalError> for CliError {
    fn from(e: covpref::eval::EvalError) -> Self {
        CliError::Domain(e.to_string())
    }
}
