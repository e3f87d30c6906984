use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A bound's precondition does not hold for the given loss/subspace pair.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("singular score subspace: smallest singular value is zero")]
    SingularSubspace,

    /// The calibration envelope vanishes at the requested accuracy, so no
    /// finite iteration count exists.
    #[error("not consistent at this accuracy: calibration envelope is {envelope}")]
    NotConsistent { envelope: f64 },

    #[error("numerical failure: {message}")]
    Convergence { message: String, best: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
