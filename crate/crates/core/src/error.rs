use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coincident points")]
    CoincidentPoints,

    #[error("point outside the ball (|z| = {norm}, R = {radius})")]
    OutsideDomain { norm: f64, radius: f64 },

    #[error("point not on the boundary sphere (|z| = {norm}, R = {radius})")]
    NotOnBoundary { norm: f64, radius: f64 },

    #[error("unsupported dimension {0} for a deterministic sphere rule (use the sampled rule)")]
    UnsupportedDimension(usize),

    #[error("invalid quadrature order: {0}")]
    InvalidOrder(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("{what} did not converge within {budget} iterations")]
    Convergence { what: &'static str, budget: usize },

    #[error("quadrature budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
