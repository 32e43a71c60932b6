use thiserror::Error;

/// Errors produced by the geometry kernels.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Evaluation left the domain of a field (zero vector inside a norm,
    /// square root of a negative number, division by zero, ...).
    #[error("domain violation: {0}")]
    Domain(String),

    /// A fundamental tensor failed the Cholesky positivity test.
    #[error("metric not positive definite: pivot {pivot:.3e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// The fundamental tensor could not be inverted.
    #[error("singular metric: {0}")]
    SingularMetric(String),

    /// The bundle metric is degenerate at the requested energy value.
    #[error("degenerate bundle metric: {0}")]
    DegenerateMetric(String),

    /// A linear solve was requested on a numerically singular system.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// An operation required a Kaluza-Klein-type metric.
    #[error("metric is not of Kaluza-Klein type: {0}")]
    NotKkType(String),

    /// A scalar profile was evaluated outside (0, +inf).
    #[error("profile domain error: {0}")]
    ProfileDomain(String),

    /// Expression parsing failed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Malformed input (dimension mismatch, inadmissible parameters, ...).
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
