use thiserror::Error;

/// Errors produced while building models, running echoes or evaluating predictions.
#[derive(Debug, Error)]
pub enum FreezeError {
    #[error("invalid spin magnitude: {0}")]
    InvalidSpin(String),

    #[error("subspace construction failed: {0}")]
    Subspace(String),

    #[error("model of dimension {dim} exceeds the dense-matrix cap of {cap}; lower J or raise the cap")]
    DimensionCap { dim: usize, cap: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("invalid echo configuration: {0}")]
    InvalidConfig(String),

    #[error("{0} is not available for this model")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = FreezeError> = std::result::Result<T, E>;
