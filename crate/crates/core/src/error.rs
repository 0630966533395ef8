use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("distance {distance} m is below the {min} m model minimum")]
    DistanceBelowMinimum { distance: f64, min: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{what}: ill-conditioned system (condition estimate {condition:.3e})")]
    Conditioning { what: &'static str, condition: f64 },

    #[error("degenerate reflection design: {0}")]
    DegenerateDesign(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("LDPC construction failed for seed {seed} after {attempts} attempts: {reason}")]
    CodeConstruction {
        seed: u64,
        attempts: usize,
        reason: String,
    },

    #[error("trial {trial} (seed {seed:#018x}) failed: {source}")]
    Trial {
        trial: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep aborted: {failed} of {total} trials failed")]
    SweepAborted { failed: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
