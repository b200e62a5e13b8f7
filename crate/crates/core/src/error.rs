use thiserror::Error;

use crate::slopes::Slope;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid slope: {0}")]
    InvalidSlope(String),
    #[error("invalid mapping class: {0}")]
    InvalidMappingClass(String),
    #[error("invalid marking: {0}")]
    InvalidMarking(String),
    #[error("curve is disjoint from the annulus core {0}")]
    DisjointFromCore(Slope),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point is too thin to bridge: systole {systole:.6} below floor {floor:.6}")]
    Thin { systole: f64, floor: f64 },
    #[error(
        "geodesic is too thin to lift at t = {t:.6}: systole {systole:.6} below floor {floor:.6}"
    )]
    ThinAlong { t: f64, systole: f64, floor: f64 },
    #[error("optimizer did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("sampling failed after {0} attempts")]
    SamplingFailed(usize),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's input rather than the
    /// environment.
    pub fn is_precondition(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
