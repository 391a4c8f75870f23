use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("state is not normalized (norm {0:.3e})")]
    NotNormalized(f64),

    #[error("norm collapse at step {step} (t = {time:.6}): pre-normalization norm {norm:.3e}")]
    NormCollapse { step: u64, time: f64, norm: f64 },

    #[error(
        "Fock truncation leak at step {step} (t = {time:.6}): top-level population {population:.3e} \
         exceeds tolerance with fock_dim = {fock_dim}"
    )]
    TruncationLeak {
        step: u64,
        time: f64,
        population: f64,
        fock_dim: usize,
    },

    #[error("fock_dim {current} is too small for these parameters; at least {required} levels are required")]
    FockDimTooSmall { required: usize, current: usize },

    #[error("record grid mismatch: {0}")]
    GridMismatch(String),

    #[error("record format error: {0}")]
    Record(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{failed} of {total} trajectories failed, above the 1% abort threshold; first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid_params",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::NotNormalized(_) => "not_normalized",
            Error::NormCollapse { .. } => "norm_collapse",
            Error::TruncationLeak { .. } => "truncation_leak",
            Error::FockDimTooSmall { .. } => "fock_dim_too_small",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::Record(_) => "record_format",
            Error::Config(_) => "config",
            Error::TooManyFailures { .. } => "too_many_failures",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
