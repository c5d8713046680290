//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of model generation, fitting, theory and experiments.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its admissible range. The message names the field.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The ridgeless closed form was requested where `tau * gamma <= 1`.
    #[error(
        "tau*gamma = {product} is not above 1; the ridgeless closed form is undefined \
         (use the saddle-point solver with r > 0)"
    )]
    InterpolationRegion {
        /// The offending product `tau * gamma`.
        product: f64,
    },

    /// An iterative solver failed to converge.
    #[error("solver diverged: {message} (residual trace: {residuals:?})")]
    SolverDiverged {
        /// Human-readable description of the failure.
        message: String,
        /// Residual norms of the last iterations, oldest first.
        residuals: Vec<f64>,
    },

    /// A Monte Carlo estimate is too noisy to be trusted.
    #[error("estimator too noisy: relative standard error {relative_error:.3e} exceeds {tolerance:.3e}")]
    EstimatorNoisy {
        /// Observed relative standard error.
        relative_error: f64,
        /// Tolerance that was exceeded.
        tolerance: f64,
    },

    /// A dense factorisation failed (matrix not positive definite, SVD failure, ...).
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn diverged(msg: impl Into<String>, residuals: Vec<f64>) -> Self {
        Error::SolverDiverged {
            message: msg.into(),
            residuals,
        }
    }
}
