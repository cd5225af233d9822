//! Backward (nabla) linear control systems on arbitrary time scales.
//!
//! The crate implements the forward/backward duality of time-scale calculus
//! and uses it to solve, analyze, and factor linear control systems written
//! with the backward jump operator: exact time-scale arithmetic, delta and
//! nabla calculus on grids, transition matrices without regressivity
//! assumptions, Kalman-style controllability and observability tests, and
//! weighting-pattern realizability checks.

pub mod analysis;
pub mod calculus;
pub mod error;
pub mod exact;
pub mod expr;
pub mod linsys;
pub mod realization;
pub mod timescale;

pub use error::{Error, Result};
pub use exact::TimePoint;
pub use timescale::{Grid, PointClass, ScaleKind, SideClass, TimeScale};
