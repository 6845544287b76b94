use thiserror::Error;

/// Errors raised by the simulation and analytics routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown protocol step `{0}`")]
    UnknownStep(String),

    #[error("step {0} has no collective dark/superradiant structure")]
    NoDissipativeStructure(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("time grid must be non-empty, start at 0 and be strictly increasing")]
    InvalidGrid,

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("Fock cutoff {cutoff} too small for {required} excitations")]
    CutoffOverflow { cutoff: usize, required: usize },

    #[error("{0} must be a power of two")]
    NotPowerOfTwo(u64),

    #[error("ensemble of {0} atoms exceeds the oracle limit of {1}")]
    EnsembleTooLarge(u32, u32),

    #[error("numerical procedure did not converge: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
