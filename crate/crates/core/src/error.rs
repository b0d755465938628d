use thiserror::Error;

/// Errors raised by the geometric kernels, problems and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An invalid scalar or structural parameter was supplied.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// An iterative kernel did not converge within its cap.
    #[error("numerical failure: {what} did not converge after {cap} iterations (matrix norm {norm:.6e})")]
    NumericalFailure {
        what: &'static str,
        norm: f64,
        cap: usize,
    },

    /// A value fell outside the domain of a function (e.g. log of a nonpositive eigenvalue).
    #[error("domain error: {0}")]
    Domain(String),

    /// Degenerate input such as a rank-deficient matrix.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Points or tangents that do not belong together (shape or base mismatch).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A tangent step exceeded the injectivity-radius guard of the manifold.
    #[error("step too long: norm {norm:.6e} exceeds guard {guard:.6e}")]
    StepTooLong { norm: f64, guard: f64 },

    /// Two points are (near) conjugate; no unique minimizing geodesic.
    #[error("no unique geodesic: angle {angle:.6e} exceeds guard {guard:.6e}")]
    NoUniqueGeodesic { angle: f64, guard: f64 },

    /// A user-supplied function produced a non-finite value.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// An iterative solver left its safe region.
    #[error("divergence: {0}")]
    Divergence(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors that signal an iterate leaving the region where
    /// the geometry is well defined.
    pub fn is_divergence_signal(&self) -> bool {
        matches!(
            self,
            Error::StepTooLong { .. }
                | Error::NoUniqueGeodesic { .. }
                | Error::Divergence(_)
                | Error::Domain(_)
                | Error::Evaluation(_)
                | Error::NumericalFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
