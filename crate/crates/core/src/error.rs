use thiserror::Error;

use crate::operator::Field;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Admissibility violation of (n, s), grid size, period, etc.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Argument outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation requested at a kernel singularity.
    #[error("singularity: {0}")]
    Singularity(String),

    /// A quadrature or truncation could not reach the requested accuracy.
    #[error("accuracy error in {what}: achieved estimate {estimate:e}, requested {requested:e}")]
    Accuracy {
        what: String,
        estimate: f64,
        requested: f64,
    },

    /// An iterative solver hit its cap; the last iterate is kept for warm restarts.
    #[error("{what} did not converge after {iterations} iterations (last measure {measure:e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        measure: f64,
        last: Option<Box<Field>>,
    },

    /// Linear solve failed; at a bifurcation point the period should be perturbed.
    #[error("singular linearization: {0}")]
    SingularLinearization(String),

    /// The critical point cannot be rescaled to a solution.
    #[error("inconsistent critical point: {0}")]
    InconsistentCriticalPoint(String),

    #[error("trajectory left the positive half-line at t = {t}")]
    TrajectoryExit { t: f64 },

    #[error("necksize matching failed: {0}")]
    Matching(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
