//! Error taxonomy shared by every module.
//!
//! Validation failures mean the input parameters are outside the supported
//! domain; the numerical variants mean a computation on valid inputs could
//! not be completed. The CLI maps the former to exit code 1 and the latter
//! to exit code 2.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented invariant. The message names the
    /// offending field and the invariant.
    #[error("validation: {0}")]
    Validation(String),

    /// The trap detuning does not have the sign required by the operation.
    #[error("detuning sign: {0}")]
    DetuningSign(String),

    /// Cavity round-trip denominator smaller than 1e-12 in magnitude; the
    /// response is not resolvable at this frequency.
    #[error("degenerate cavity: {0}")]
    DegenerateCavity(String),

    /// A position or frequency argument lies outside the region where the
    /// requested quantity is defined.
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// An iterative solver exhausted its budget before reaching tolerance.
    #[error("convergence: {0}")]
    Convergence(String),

    /// The drift matrix has an eigenvalue with non-negative real part, so
    /// no steady state exists.
    #[error("unstable model: {0}")]
    UnstableModel(String),

    /// A linear solve was degenerate or too ill-conditioned to trust.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// Honoring the integrator step bound would exceed the step budget.
    #[error("step size: required {required} steps, budget {budget}")]
    StepSize {
        /// Substeps the requested evolution would need.
        required: u64,
        /// Hard cap on substeps per call.
        budget: u64,
    },

    /// A formula was evaluated at a point where its denominator vanishes.
    #[error("division domain: {0}")]
    DivisionDomain(String),

    /// An optimization found no parameter point that evaluates cleanly.
    #[error("no feasible point: {0}")]
    NoFeasiblePoint(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than failed numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::DetuningSign(_))
    }
}
