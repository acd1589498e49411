//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("weight bound violated at {point:?}: f = {value} outside [{lower}, {upper}]")]
    WeightBounds {
        point: Vec<f64>,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("gradient self-check failed: {0}")]
    GradientCheck(String),

    #[error("grid: {0}")]
    Grid(String),

    #[error("boundary data: {0}")]
    Boundary(String),

    #[error("point outside the covered region: {0:?}")]
    OutsideRegion(Vec<f64>),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
