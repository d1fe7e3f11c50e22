use thiserror::Error;

use crate::dynamics::SimState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("extension {extension_mm} mm exceeds the {limit_mm} mm limit")]
    ExtensionLimit { extension_mm: f64, limit_mm: f64 },

    #[error("damping capacity undefined: loading work is zero")]
    UndefinedDamping,

    #[error("calibration failed after {iterations} iterations: {message} (residuals {residuals:?})")]
    Calibration {
        message: String,
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("surrogate rejected: {0}")]
    NonMonotone(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("simulation blew up at t = {time} s: {message}")]
    BlowUp {
        time: f64,
        message: String,
        last_valid: Box<SimState>,
    },

    #[error("target unreachable: {excess_m} m outside the reachable annulus")]
    Unreachable { excess_m: f64 },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("incomplete table, missing configurations: {0:?}")]
    MissingConfigurations(Vec<String>),

    #[error("unknown jamming case `{0}`")]
    UnknownCase(String),

    #[error("no contact detected in series")]
    NoContact,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
