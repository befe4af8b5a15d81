use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported resampling ratio {from_hz} Hz -> {to_hz} Hz")]
    UnsupportedRatio { from_hz: f64, to_hz: f64 },

    #[error("filter design failed: {0}")]
    DesignFailure(String),

    #[error("marker {index} (start sample {start}) overruns the recording of {len} samples")]
    MarkerOutOfBounds { index: usize, start: usize, len: usize },

    #[error("degenerate segment: trial {trial}, {kind} channel {channel} has zero area")]
    DegenerateSegment {
        trial: usize,
        kind: &'static str,
        channel: usize,
    },

    #[error("insufficient trials: need at least {needed}, got {got}")]
    InsufficientTrials { needed: usize, got: usize },

    #[error("band `{0}` contains no frequency bins")]
    EmptyBand(String),

    #[error("unknown band `{0}`")]
    UnknownBand(String),

    #[error("class missing: {0}")]
    ClassMissing(String),

    #[error("insufficient neighbours: {minority} minority rows cannot supply k = {k} neighbours")]
    InsufficientNeighbors { minority: usize, k: usize },

    #[error("invalid cluster count {m} for {points} points")]
    InvalidClusterCount { m: usize, points: usize },

    #[error("similarity graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("eigen-solver failed: {0}")]
    Solver(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("SVM did not converge within {iterations} pair updates (KKT violation {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("stratification infeasible: {0}")]
    Stratification(String),

    #[error("no feasible consensus parameters in the grid")]
    NoFeasibleModel,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed input {path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            message: message.into(),
        }
    }
}
