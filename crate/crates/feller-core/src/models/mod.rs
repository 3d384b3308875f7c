//! Exact implementations of the four semigroups.

pub mod chain;
pub mod heat;
pub mod rotation;
pub mod slide;

pub use chain::FiniteChain;
pub use heat::{GaussianModeLaw, HeatKernel, HeatModelParams, SigmaRule};
pub use rotation::RotationParams;
pub use slide::{SlideMetric, SlideParams};
