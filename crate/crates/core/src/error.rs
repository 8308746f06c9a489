use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VpError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("scale `{0}` does not decrease to zero on the sampled grid")]
    ScaleNotDecreasing(String),

    #[error("shell at radius {radius} is thinner than its radial kernel width {width}")]
    ShellTouchesOrigin { radius: f64, width: f64 },

    #[error("particle {index} sits at r = 0 with angular momentum {l}")]
    CentrifugalSingularity { index: usize, l: f64 },

    #[error("non-finite state at t = {time}: particle {index} (r = {r}, vr = {vr})")]
    NonFinite {
        time: f64,
        index: usize,
        r: f64,
        vr: f64,
    },

    #[error("support radius {support} escaped the field grid (r_max = {grid_max})")]
    SupportEscapedGrid { support: f64, grid_max: f64 },

    #[error("density support is not declared; cannot certify vanishing at infinity")]
    UndeclaredSupport,

    #[error("zero density: the key estimate ratio is undefined")]
    ZeroDensity,

    #[error("fit needs at least {needed} positive pairs, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("non-positive value {value} for quantity `{quantity}`")]
    NonPositive { quantity: String, value: f64 },

    #[error("perturbation size {delta} is not small against the kernel width {width}")]
    PerturbationTooLarge { delta: f64, width: f64 },

    #[error("tangent tracking was not enabled for this run")]
    TangentDisabled,

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl VpError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        VpError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VpError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, VpError>;
