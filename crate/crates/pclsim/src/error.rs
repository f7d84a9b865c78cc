//! Crate-wide error type.
//!
//! Errors are grouped so the CLI can map them onto its two failure exit
//! codes: configuration problems (bad config file, invalid dimensions,
//! out-of-range fractions) and runtime problems (parse failures, contract
//! violations, I/O, divergence).

use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value (dimensions, fractions, enumerations).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input data failed to parse; carries enough context to locate the row.
    #[error("parse error: {0}")]
    Parse(String),

    /// A VES event could not be ingested; the event is retained for
    /// dead-lettering.
    #[error("ingestion error: {reason} (event from {source_name})")]
    Ingest { reason: String, source_name: String },

    /// Model training could not start (e.g. series too short).
    #[error("training error: {0}")]
    Training(String),

    /// Training produced a non-finite loss.
    #[error("divergence at epoch {epoch}: loss became non-finite")]
    Divergence { epoch: usize },

    /// No ARIMA candidate converged.
    #[error("fit error: {0}")]
    Fit(String),

    /// The closed loop could not run for an hour (insufficient history);
    /// callers fall back to static limits for that hour.
    #[error("loop error: {0}")]
    Loop(String),

    /// A transport inbox refused a message.
    #[error("backpressure: {0}")]
    Backpressure(String),

    /// An E2/A1/O2 message violated protocol-level invariants.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// A translation step addressed an unknown slice or cell.
    #[error("translation error: {0}")]
    Translation(String),

    /// The node simulator was driven with inconsistent inputs.
    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the error is the operator's configuration rather than a
    /// runtime failure; the CLI maps this to exit code 2.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
