use thiserror::Error;

/// Failure modes shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input violates a documented precondition (shape, range, symmetry, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A resultant (weighted sum of directions) collapsed to near zero length.
    #[error("degenerate direction: resultant norm {norm:e} is below threshold")]
    DegenerateDirection { norm: f64 },

    /// A reconstructed variance on the diagonal was not strictly positive.
    #[error("degenerate scale at index {index}: diagonal entry {value:e}")]
    DegenerateScale { index: usize, value: f64 },

    /// An iterative method failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
