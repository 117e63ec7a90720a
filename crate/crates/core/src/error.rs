use std::path::PathBuf;

use num_bigint::BigUint;
use thiserror::Error;

use crate::graph::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed network: {0}")]
    Malformed(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(ValidationReport),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// An active component of the conductance graph cannot carry its sources.
    #[error("kirchhoff system unsolvable on component {component:?}: {reason}")]
    Unsolvable { component: Vec<usize>, reason: String },

    #[error("descent exceeded {0} iterations")]
    IterationCap(usize),

    #[error("gradient descent did not converge after {iterations} iterations (projected gradient norm {grad_norm:e})")]
    Convergence { iterations: usize, grad_norm: f64 },

    #[error("spanning tree enumeration refused: graph has {count} spanning trees, cap is {cap}")]
    TooManyTrees { count: BigUint, cap: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Convergence { .. } | Error::IterationCap(_) => 3,
            _ => 1,
        }
    }
}
