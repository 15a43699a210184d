use std::path::PathBuf;

pub type AppResult<T> = Result<T, AppError>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] mcgdm_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("gradient check failed: {0}")]
    GradCheck(String),
}

impl AppError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for divergence, 3 for a failed gradient check,
    /// 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Core(mcgdm_core::Error::Divergence { .. }) => 2,
            AppError::GradCheck(_) => 3,
            _ => 1,
        }
    }
}
