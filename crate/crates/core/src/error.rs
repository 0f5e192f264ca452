//! Error type shared across the crate.
//!
//! Domain errors (invalid indices, out-of-range physical parameters, bad
//! configuration) are reported through [`SimError`]. Violations of internal
//! contracts such as dimension mismatches between matrices panic instead;
//! they indicate a bug in the caller, not bad input.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    /// A value fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The experiment configuration is inconsistent or violates an invariant.
    #[error("config error: {0}")]
    Config(String),

    /// A Monte-Carlo trial failed; the seed identifies the reproducing draw.
    #[error("trial with seed {seed} failed: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<SimError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn domain(msg: impl Into<String>) -> Self {
        SimError::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }
}
