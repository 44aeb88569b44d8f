use std::path::PathBuf;

use gls_core::GlsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] GlsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("verification failed: {0}")]
    Failed(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 parse, 3 precondition, 4 numeric divergence, 5 verification failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Failed(_) => 5,
            CliError::Core(e) => match e {
                GlsError::Parse(_) => 2,
                GlsError::Divergence(_)
                | GlsError::UnboundedNorm(_)
                | GlsError::UnboundedDual { .. }
                | GlsError::Sampler(_) => 4,
                GlsError::InvalidArgument(_)
                | GlsError::Hypothesis(_)
                | GlsError::InsufficientRange(_)
                | GlsError::EmptyCell { .. }
                | GlsError::WrongKind(_) => 3,
            },
        }
    }
}
