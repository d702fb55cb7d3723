use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("point ({x}, {y}) lies outside the cabinet")]
    OutsideDomain { x: f64, y: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("disconnected fluid region: {0}")]
    DisconnectedFluid(String),

    #[error("Picard iteration did not converge in {iterations} iterations (last change {last:.3e})")]
    PicardDivergence { iterations: usize, history: Vec<f64>, last: f64 },

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("ill-conditioned cross-Gramian: smallest singular value {smallest:.3e}, condition number {condition:.3e}")]
    IllConditioned { smallest: f64, condition: f64 },

    #[error("well-posedness requires N > m > n, got n = {n}, m = {m}")]
    WellPosedness { n: usize, m: usize },

    #[error("grid hash mismatch: {0}")]
    GridMismatch(String),

    #[error("sensor pool exhausted after {selected} selections")]
    PoolExhausted { selected: usize },

    #[error("overlapping sensors {0} and {1}")]
    OverlappingSensors(usize, usize),

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used for the CLI error document and the C ABI codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "geometry",
            Error::OutsideDomain { .. } => "outside_domain",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::DisconnectedFluid(_) => "disconnected_fluid",
            Error::PicardDivergence { .. } => "picard_divergence",
            Error::LinearSolver(_) => "linear_solver",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::WellPosedness { .. } => "well_posedness",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::PoolExhausted { .. } => "pool_exhausted",
            Error::OverlappingSensors(..) => "overlapping_sensors",
            Error::Undefined(_) => "undefined",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}
