use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("non-positive Jacobian in element {element} (det J = {det:e})")]
    Geometry { element: usize, det: f64 },

    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("invalid boundary conditions: {0}")]
    BoundaryConditions(String),

    #[error("under-constrained model: {0}")]
    UnderConstrained(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("material database is empty")]
    EmptyDatabase,

    #[error("state {0} has non-finite components")]
    NonFinite(usize),

    #[error("metric is not symmetric positive definite")]
    MetricNotSpd,

    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    #[error("requested {requested} clusters but only {distinct} distinct points are available")]
    TooManyClusters { requested: usize, distinct: usize },

    #[error("cluster {0} has zero total weight")]
    EmptyCluster(usize),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::BoundaryConditions(_) | Error::Mesh(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 4,
            _ => 3,
        }
    }
}
