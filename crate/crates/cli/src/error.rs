use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] wtdp_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for bad configuration, 3 for numerical non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use wtdp_core::Error as E;
        match self {
            Error::Config(_) => 2,
            Error::Model(
                E::InvalidParameter { .. } | E::ProbabilityDomain(_) | E::KTooLarge { .. },
            ) => 2,
            Error::Model(E::NonConvergent(_)) => 3,
            _ => 1,
        }
    }
}
