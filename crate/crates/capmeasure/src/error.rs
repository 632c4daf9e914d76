//! Crate-wide error type.
//!
//! Errors are grouped by how the command line maps them to exit codes:
//! configuration and validation problems (exit 2), infeasible covering or
//! selection problems (exit 3), and internal invariant failures (exit 4).

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad input data or parameters: rejected before any computation runs.
    #[error("{0}")]
    Config(String),

    /// A covering or scale-selection problem has no solution under the given
    /// constraints (for example no candidate ball of radius <= delta covers
    /// some point of the target set).
    #[error("{0}")]
    Infeasible(String),

    /// A post-condition the library re-checks on its own output failed.
    #[error("{0}")]
    Internal(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    /// Machine-parsable category prefix used by the CLI error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Infeasible(_) => "infeasible",
            Error::Internal(_) => "internal",
            Error::Io(_) | Error::Json(_) => "config",
        }
    }

    /// Process exit code for the CLI: 2 config, 3 infeasible, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::Infeasible(_) => 3,
            Error::Internal(_) => 4,
        }
    }
}
