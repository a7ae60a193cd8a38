use alloc::string::String;

/// Errors raised by the regression core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("incompatible curves: sampled on different grids")]
    GridMismatch,

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("curve set must contain at least one curve")]
    EmptyCurveSet,

    #[error("{0}")]
    InvalidArgument(String),

    #[error("bandwidth heuristic is undefined ({0}); supply an explicit bandwidth")]
    DegenerateBandwidth(&'static str),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("linear system is singular or indefinite (condition estimate {condition:e}){hint}")]
    Singular { condition: f64, hint: &'static str },

    #[error("degenerate GCV: trace of (I - A(lambda)) is {0:e}, lambda is effectively zero")]
    DegenerateGcv(f64),

    #[error("all kernel weights underflow; use a larger bandwidth")]
    WeightUnderflow,

    #[error("evaluation point {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("negative value {value} at position {index}")]
    NegativeValue { index: usize, value: f64 },

    #[error("every candidate on the selection grid failed: {0}")]
    AllCandidatesFailed(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::DegenerateGcv(_)
                | Error::WeightUnderflow
                | Error::AllCandidatesFailed(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
