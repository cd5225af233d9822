//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A generated or explicit time scale has no points in the requested window.
    #[error("empty time scale")]
    EmptyTimeScale,

    /// A constructor or operation argument is out of its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A time value that must belong to the scale does not.
    #[error("point {0} not in scale")]
    PointNotInScale(String),

    /// A time value that must be a grid node is not one.
    #[error("point {0} not on grid")]
    PointNotOnGrid(String),

    /// Expression syntax error, with a byte offset into the source text.
    #[error("syntax error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    /// Expression evaluation error (division by zero and friends).
    #[error("evaluation error: {0}")]
    Eval(String),

    /// Matrix or vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A constant-matrix test was asked to run on time-varying entries.
    #[error("time-varying entries: {0}")]
    TimeVarying(String),

    /// The working interval does not contain enough scale points.
    #[error("interval too short: {0}")]
    TooFewPoints(String),

    /// A numerical invariant that the library checks internally failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A theorem hypothesis required by the requested analysis does not hold.
    #[error("theorem hypothesis violated: {0}")]
    Hypothesis(String),
}
