use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: domain violations, malformed measures, non-unitary operators.
    Validation,
    /// A numerical procedure failed to converge or to resolve its target.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invariant violated: {what} (tolerance {tol:e})")]
    InvariantViolation { what: String, tol: f64 },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("function is not inner: max ||f|-1| = {max_deviation:e} exceeds {tol:e}")]
    NotInner { max_deviation: f64, tol: f64 },

    #[error("ill-conditioned input: {what} (tolerance {tol:e})")]
    IllConditioned { what: String, tol: f64 },

    #[error("pole at {0}")]
    Pole(String),

    #[error("system is transient: survival probability {survival:e} exceeds {tol:e}, quantity undefined")]
    Transient { survival: f64, tol: f64 },

    #[error("estimation failed: {what}; {diagnostics}")]
    EstimationFailure { what: String, diagnostics: String },

    #[error("insufficient resolution: {what} after {refinements} refinements")]
    Resolution { what: String, refinements: usize },

    #[error("square-root branch tracking failed at z = {0}")]
    Branch(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvariantViolation { .. }
            | Error::Domain(_)
            | Error::NotInner { .. }
            | Error::IllConditioned { .. }
            | Error::Pole(_)
            | Error::Transient { .. } => ErrorKind::Validation,
            Error::EstimationFailure { .. } | Error::Resolution { .. } | Error::Branch(_) => {
                ErrorKind::Numerical
            }
        }
    }

    pub(crate) fn invariant(what: impl Into<String>, tol: f64) -> Self {
        Error::InvariantViolation { what: what.into(), tol }
    }
}
