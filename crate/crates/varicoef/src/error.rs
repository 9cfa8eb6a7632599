//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's contract (shape mismatch, bad range, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numerical computation left the finite range.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A forward solve blew up.
    #[error("solver blow-up at step {step} (t = {time}): {detail}")]
    BlowUp {
        step: usize,
        time: f64,
        detail: String,
    },

    /// Explicit time step too large for the given medium.
    #[error("CFL violation: dt = {dt} but the admissible step is {admissible}")]
    Cfl { dt: f64, admissible: f64 },

    /// Training loss became non-finite; the last finite parameters are attached.
    #[error("training diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        checkpoint: Box<crate::inverse::TrainedPair>,
    },

    /// EM could not keep all mixture components populated.
    #[error("EM failure: {0}")]
    Em(String),

    /// Malformed or unreadable on-disk artifact.
    #[error("format error in {path}: {detail}")]
    Format { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn format(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
