use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LcidError {
    #[error(transparent)]
    Core(#[from] lcid_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Json { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(
        "model is degenerate on the frequency grid (|G| = {magnitude:.3e} at omega = {omega:.6})"
    )]
    DegenerateModel { omega: f64, magnitude: f64 },
    #[error("every benchmark run failed")]
    AllRunsFailed,
}

impl LcidError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LcidError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LcidError::Invalid(msg.into())
    }

    /// Process exit status: 2 for a degenerate design, 3 when a benchmark
    /// produced no successful run, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LcidError::Core(lcid_core::Error::DegenerateDesign { .. }) => 2,
            LcidError::AllRunsFailed => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LcidError>;
