use thiserror::Error;

use crate::integrator::StepRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("spectra live on different grids")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    Overflow(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("monitor `{monitor}` failed at t = {:.6e}", record.time)]
    MonitorViolation {
        monitor: &'static str,
        record: Box<StepRecord>,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("config: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
