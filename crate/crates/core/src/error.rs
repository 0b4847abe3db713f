use thiserror::Error;

/// Errors produced anywhere in the simulation library.
#[derive(Debug, Error)]
pub enum ViolinError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("hessian requested on a ReLU kink (distance {distance:e})")]
    Kink { distance: f64 },

    #[error("probe resampling gave up after {retries} kink hits")]
    KinkRetriesExhausted { retries: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("matrix is not symmetric (max deviation {max_dev:e})")]
    Asymmetric { max_dev: f64 },

    #[error("posterior underflowed to the zero vector")]
    NumericalUnderflow,

    #[error("budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("sign cancellation detected: {0}")]
    Cancellation(String),

    #[error("consistency set became empty; the truth was eliminated")]
    EmptyConsistencySet,

    #[error("no approximate local maximum found within the search budget")]
    EmptyLocalMaxSet,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ViolinError>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(ViolinError::DimensionMismatch { expected, found });
    }
    Ok(())
}
