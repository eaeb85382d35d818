use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("cannot sample {requested} distinct entries from {available}")]
    TooManySamples { requested: usize, available: usize },

    #[error("failed to allocate {elements} matrix entries")]
    Allocation { elements: usize },

    #[error("{0} did not converge")]
    Convergence(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid split: cannot hold out {m_val} of {m} measurements")]
    InvalidSplit { m: usize, m_val: usize },

    #[error("trajectory has no records")]
    EmptyTrajectory,

    #[error("record at t = {t} has no validation loss")]
    MissingValidation { t: usize },

    #[error("gradient descent diverged at t = {t}: loss {loss:e} vs initial {initial:e}")]
    Divergence { t: usize, loss: f64, initial: f64 },

    #[error("non-finite value in iterate at t = {t}")]
    NonFinite { t: usize },

    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("malformed operator file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}
