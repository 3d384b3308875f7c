//! Numerical laboratory for Markov-Feller semigroups.
//!
//! The crate implements four concrete semigroups exactly (a spectral
//! stochastic heat equation on the torus, an irrational rotation with an
//! attached tail of isolated points, the slide semigroup `x -> (x - t)+`
//! under two metrics, and finite-state chains with exact duals), together
//! with the machinery needed to probe their regularity:
//!
//! * Monte-Carlo estimation of the dual action `P_t f(x)` with common
//!   random numbers and deterministic seeding ([`semigroup`], [`rng`]);
//! * estimators for the moduli behind the e-property, the eventual
//!   e-property, eventual continuity, strong continuity, complete mixing
//!   and asymptotic stability ([`regularity`]);
//! * the inductive measure-splitting construction behind the telescoping
//!   decomposition of `P_{s_1+...+s_k} delta_x`, exact on finite chains
//!   ([`decomposition`]);
//! * Cesaro averages, Birkhoff path averages, invariant-measure residuals
//!   and support-inclusion checks ([`ergodic`]);
//! * exact Wasserstein-1 distances between empirical measures
//!   ([`wasserstein`]).
//!
//! Everything is deterministic given an [`rng::RngStream`]: identical
//! inputs reproduce identical outputs bit for bit, independently of how
//! callers schedule work across threads.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the companion CLI
//! crate carries IO, file formats and parallel orchestration.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod decomposition;
pub mod ergodic;
pub mod error;
pub mod math;
pub mod measure;
pub mod models;
pub mod observable;
pub mod regularity;
pub mod rng;
pub mod semigroup;
pub mod space;
pub mod stats;
pub mod wasserstein;

pub use error::CoreError;
pub use measure::{EmpiricalMeasure, ProbVector};
pub use observable::TestFunction;
pub use rng::RngStream;
pub use semigroup::{SemigroupModel, TimeKind};
pub use space::{MetricPoint, RotationPoint, SpectralState};
