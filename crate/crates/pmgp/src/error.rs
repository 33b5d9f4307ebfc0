//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A derivative order beyond the kernel's differentiability was requested.
    #[error("unsupported derivative order {order}: a Matérn kernel with p={p} is only {max}-times differentiable")]
    UnsupportedOrder { order: usize, p: usize, max: usize },

    /// Mismatched vector/matrix dimensions.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Timestamps out of order (the filter requires strictly increasing times).
    #[error("ordering error: {0}")]
    Ordering(String),

    /// Invalid input value (non-finite observation, bad configuration, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Numerical failure: a matrix that should be positive definite is not,
    /// even after stabilization.
    #[error("conditioning error: {0}")]
    Conditioning(String),

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),

    /// A series whose increments have zero variance cannot be NMAE-scored.
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs);
    /// the CLI maps these to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Conditioning(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
