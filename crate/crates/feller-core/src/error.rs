use alloc::string::String;
use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    /// Two points (or measures) from different state spaces were combined.
    #[error("mismatched state spaces: {0}")]
    MismatchedSpaces(String),

    /// Negative time, or fractional time handed to a discrete-time model.
    #[error("invalid time {t}: {reason}")]
    InvalidTime { t: f64, reason: &'static str },

    /// The model does not implement the requested operation.
    #[error("unsupported operation: {0}")]
    UnsupportedOperation(&'static str),

    /// A constructor or operation received an out-of-domain argument.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Vector/matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// No `t <= t_max` pushes the measure's mass on `B` above `alpha`.
    /// Signals that the entry-time hypothesis fails for this instance.
    #[error("no entry time <= {t_max} at stage {stage}")]
    NoEntryTime { stage: usize, t_max: u64 },

    /// `theta(B) <= alpha`, so the measure split is undefined.
    #[error("insufficient mass on B: have {have}, need > {need}")]
    InsufficientMass { have: f64, need: f64 },

    /// A documented hypothesis of the operation does not hold.
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    /// General-metric Wasserstein matching beyond the exact cap.
    #[error("sample count {n} exceeds exact matching cap {cap}")]
    MatchingCapExceeded { n: usize, cap: usize },

    /// An estimation grid was empty.
    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),
}

pub type Result<T> = core::result::Result<T, CoreError>;
