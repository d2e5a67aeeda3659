use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported potential: {0}")]
    UnsupportedPotential(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("droplet touches the boundary of the computational box; enlarge the box")]
    BoxTooSmall,

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("missing upstream artifact {path}: {hint}")]
    MissingArtifact { path: PathBuf, hint: String },

    #[error("malformed artifact {path}: {message}")]
    MalformedArtifact { path: PathBuf, message: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
