use thiserror::Error;

/// Errors produced across the simulator and trainer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("invalid tree `{tree}`: {}", diagnostics.join("; "))]
    InvalidTree {
        tree: String,
        diagnostics: Vec<String>,
    },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("simulation diverged at t = {t:.4} s: {reason}")]
    Diverged {
        t: f64,
        reason: String,
        /// JSON snapshot of the last valid state (trajectory frame schema).
        snapshot: Box<serde_json::Value>,
    },

    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("architecture mismatch: {0}")]
    Architecture(String),

    #[error("training aborted at update {update}: {reason}")]
    TrainingAborted { update: u64, reason: String },

    #[error("trajectory line {line}: {reason}")]
    Trajectory { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.into(),
        reason: reason.into(),
    }
}
