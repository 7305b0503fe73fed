use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("enumeration of (2d)^k = {size} words exceeds the budget of {budget}")]
    BudgetExceeded { size: f64, budget: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid trail: {0}")]
    InvalidTrail(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("input matrix is not symmetric (max asymmetry {0})")]
    NotSymmetric(f64),

    #[error("walk counting inconsistency: {0}")]
    Inconsistent(String),

    #[error("trace identity violated at k = {k}: float value {value} is {distance} from the nearest integer")]
    IdentityViolation { k: usize, value: f64, distance: f64 },

    #[error("integer overflow while {0}")]
    Overflow(&'static str),

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("support of {0} points is too large for exact convolution")]
    SupportTooLarge(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
