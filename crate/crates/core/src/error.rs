use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: String, expected: usize, found: usize },

    #[error("unbounded")]
    Unbounded,

    #[error("empty set")]
    EmptySet,

    #[error("not a member")]
    NotMember,

    #[error("not maximal: atom {atom} can be raised by {slack:.3e}")]
    NotMaximal { atom: usize, slack: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("certificate rejected: {0}")]
    Rejected(#[from] crate::bishop_phelps::Rejection),

    #[error("bishop-phelps step {step} failed: {reason}")]
    Step { step: usize, reason: String },

    #[error("domain: {0}")]
    Domain(String),

    #[error("infinite marginal at zero on atom {0}")]
    InfiniteMarginal(usize),

    #[error("flat utility")]
    FlatUtility,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Errors caused by the caller's input rather than by a solver.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::DimensionMismatch { .. }
                | Error::Unbounded
                | Error::EmptySet
                | Error::NotMember
                | Error::NotMaximal { .. }
                | Error::Rejected(_)
                | Error::Domain(_)
        )
    }
}
