use thiserror::Error;

/// Errors raised by the homogenization library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("constitutive tensor is not positive definite at cell {cell} (smallest eigenvalue {min_eigenvalue:e})")]
    SingularCell { cell: usize, min_eigenvalue: f64 },

    #[error("constitutive tensor is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("operation requires linear (quadratic) phases; phase {0} is nonlinear")]
    NonlinearPhase(usize),

    #[error("iteration diverged after {iterations} iterations: {reason}")]
    Diverged { iterations: usize, reason: String },

    #[error("numerical breakdown: {0}")]
    Breakdown(String),

    #[error("line search failed: {0}")]
    LineSearch(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
