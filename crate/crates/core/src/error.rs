//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or parameter combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// Shape mismatch between interacting values.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A descriptor or fitness evaluation failed. Carries the request id of
    /// the backend call when one was involved.
    #[error("evaluation failed{}: {message}", request_id.as_deref().map(|id| format!(" [{id}]")).unwrap_or_default())]
    Evaluation {
        request_id: Option<String>,
        message: String,
    },

    /// Remote backend failure after retries, or a wire-protocol violation.
    #[error("backend error{}: {message}", request_id.as_deref().map(|id| format!(" [{id}]")).unwrap_or_default())]
    Backend {
        request_id: Option<String>,
        retryable: bool,
        message: String,
    },

    /// A statistical estimator could not run on the given samples.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Reducer fitting failed (degenerate reference corpus or bad shapes).
    #[error("fit error: {0}")]
    Fit(String),

    /// Archive snapshot export or import failure.
    #[error("snapshot error: {0}")]
    Snapshot(String),

    /// Checkpoint write, read, or version failure.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn evaluation(msg: impl Into<String>) -> Self {
        Error::Evaluation {
            request_id: None,
            message: msg.into(),
        }
    }

    /// True when retrying the same call might succeed (transient backend trouble).
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Backend { retryable: true, .. })
    }
}
