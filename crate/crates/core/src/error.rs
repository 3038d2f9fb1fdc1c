use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("radius {radius} is outside the tabulated range [{min}, {max}]")]
    OutsideTable { radius: f64, min: f64, max: f64 },

    #[error("kernel is not integrable against 1/|x| near the origin (partial value {partial})")]
    NonIntegrableKernel { partial: f64 },

    #[error("quadrature did not converge: value {value}, error estimate {error}")]
    Quadrature { value: f64, error: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("covariance matrix is degenerate even after jitter {jitter}")]
    DegenerateCovariance { jitter: f64 },

    #[error("grid misalignment: {0}")]
    Alignment(String),

    #[error("unsupported sphere rule: {0}")]
    UnsupportedSphereRule(String),

    #[error("numerical blow-up at t = {t}, x = {x:?}")]
    BlowUp { t: f64, x: [f64; 3] },

    #[error("Picard iteration did not converge after {iterations} iterations (last delta {final_delta})")]
    IterationLimit { iterations: usize, final_delta: f64 },

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
