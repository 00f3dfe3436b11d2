//! Crate-wide error type.
//!
//! Variants are grouped by the exit code the CLI maps them to: configuration
//! problems (2), data/parse problems (3) and solver failures (4).

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed text input (TSV/CSV/FASTA); `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Malformed EC label.
    #[error("invalid EC label {label:?}: {msg}")]
    EcLabel { label: String, msg: String },

    /// Inconsistent or invalid data (dimensions, ids, degenerate inputs).
    #[error("{0}")]
    Data(String),

    /// Invalid configuration or parameters.
    #[error("{0}")]
    Config(String),

    /// Iterative solver exhausted its iteration budget.
    #[error("solver did not converge: relative residual {residual:.3e} after {iterations} operator applications")]
    NonConvergence { residual: f64, iterations: usize },

    /// Other solver failure (singular system, eigendecomposition breakdown).
    #[error("solver failure: {0}")]
    Solver(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 solver.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 2,
            Error::Parse { .. } | Error::EcLabel { .. } | Error::Data(_) => 3,
            Error::Io { .. } | Error::Json { .. } => 3,
            Error::NonConvergence { .. } | Error::Solver(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
