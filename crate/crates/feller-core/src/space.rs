//! States of the four model state spaces.

use crate::error::{CoreError, Result};
use crate::math::sqrt;
use crate::stats::CompensatedSum;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Point of the rotation-with-tail space `[-1,0] ∪ {1/n : n >= 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotationPoint {
    /// `u` in `[-1, 0]`.
    Interval(f64),
    /// The isolated point `1/n`, `n >= 1`.
    Tail(u32),
}

impl RotationPoint {
    /// Canonical embedding into the reals: `Interval(u) -> u`, `Tail(n) -> 1/n`.
    pub fn embed(&self) -> f64 {
        match *self {
            RotationPoint::Interval(u) => u,
            RotationPoint::Tail(n) => 1.0 / n as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RotationPoint::Interval(u) => {
                if !(-1.0..=0.0).contains(&u) {
                    return Err(CoreError::InvalidParameter(format!(
                        "interval coordinate {u} outside [-1, 0]"
                    )));
                }
            }
            RotationPoint::Tail(n) => {
                if n == 0 {
                    return Err(CoreError::InvalidParameter(
                        "tail index must be >= 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Zero-mean spectral state: real coefficients on modes `k` with
/// `1 <= |k| <= N`. Mode 0 is structurally absent.
///
/// Layout: index `i < N` holds mode `k = i + 1`; index `N + i` holds mode
/// `k = -(i + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    half: usize,
    coeffs: Vec<f64>,
}

impl SpectralState {
    pub fn zero(n_modes: usize) -> Self {
        Self {
            half: n_modes,
            coeffs: vec![0.0; 2 * n_modes],
        }
    }

    /// Builds a state from `(mode, coefficient)` pairs; unspecified modes
    /// are zero.
    pub fn from_modes(n_modes: usize, modes: &[(i32, f64)]) -> Result<Self> {
        let mut state = Self::zero(n_modes);
        for &(k, v) in modes {
            state.set_mode(k, v)?;
        }
        Ok(state)
    }

    pub fn max_mode(&self) -> usize {
        self.half
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Index of mode `k` in the dense layout.
    #[inline]
    pub fn index_of(&self, k: i32) -> Result<usize> {
        let a = k.unsigned_abs() as usize;
        if k == 0 || a > self.half {
            return Err(CoreError::InvalidParameter(format!(
                "mode {k} outside 1 <= |k| <= {}",
                self.half
            )));
        }
        Ok(if k > 0 { a - 1 } else { self.half + a - 1 })
    }

    /// Mode index for dense position `i`.
    #[inline]
    pub fn mode_at(&self, i: usize) -> i32 {
        if i < self.half {
            (i + 1) as i32
        } else {
            -((i - self.half + 1) as i32)
        }
    }

    pub fn mode(&self, k: i32) -> Result<f64> {
        Ok(self.coeffs[self.index_of(k)?])
    }

    pub fn set_mode(&mut self, k: i32, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "non-finite coefficient for mode {k}"
            )));
        }
        let i = self.index_of(k)?;
        self.coeffs[i] = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.coeffs.len() != 2 * self.half {
            return Err(CoreError::DimensionMismatch {
                expected: 2 * self.half,
                got: self.coeffs.len(),
            });
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::InvalidParameter(
                "non-finite spectral coefficient".into(),
            ));
        }
        Ok(())
    }

    /// `sqrt(sum_k a_k^2)`.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for &c in &self.coeffs {
            acc.add(c * c);
        }
        sqrt(acc.value())
    }

    /// `sqrt(sum_k k^2 a_k^2)`.
    pub fn h1_norm(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for (i, &c) in self.coeffs.iter().enumerate() {
            let k = self.mode_at(i) as f64;
            acc.add(k * k * c * c);
        }
        sqrt(acc.value())
    }

    /// L2 distance between two states on the same mode range.
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        if self.half != other.half {
            return Err(CoreError::DimensionMismatch {
                expected: self.half,
                got: other.half,
            });
        }
        let mut acc = CompensatedSum::new();
        for (&a, &b) in self.coeffs.iter().zip(&other.coeffs) {
            let d = a - b;
            acc.add(d * d);
        }
        Ok(sqrt(acc.value()))
    }
}

/// A state in one of the four model state spaces.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricPoint {
    /// Spectral coefficient vector of the heat model.
    Spectral(SpectralState),
    /// Point of the rotation-with-tail space.
    IntervalOrTail(RotationPoint),
    /// Point of the unit interval (slide model).
    Unit(f64),
    /// State index of a finite chain.
    Chain(usize),
}

impl MetricPoint {
    pub fn kind_name(&self) -> &'static str {
        match self {
            MetricPoint::Spectral(_) => "spectral",
            MetricPoint::IntervalOrTail(_) => "interval-or-tail",
            MetricPoint::Unit(_) => "unit",
            MetricPoint::Chain(_) => "chain",
        }
    }

    pub fn as_spectral(&self) -> Result<&SpectralState> {
        match self {
            MetricPoint::Spectral(s) => Ok(s),
            other => Err(CoreError::MismatchedSpaces(format!(
                "expected spectral state, got {}",
                other.kind_name()
            ))),
        }
    }

    pub fn as_rotation(&self) -> Result<RotationPoint> {
        match self {
            MetricPoint::IntervalOrTail(p) => Ok(*p),
            other => Err(CoreError::MismatchedSpaces(format!(
                "expected interval-or-tail point, got {}",
                other.kind_name()
            ))),
        }
    }

    pub fn as_unit(&self) -> Result<f64> {
        match self {
            MetricPoint::Unit(x) => Ok(*x),
            other => Err(CoreError::MismatchedSpaces(format!(
                "expected unit-interval point, got {}",
                other.kind_name()
            ))),
        }
    }

    pub fn as_chain(&self) -> Result<usize> {
        match self {
            MetricPoint::Chain(i) => Ok(*i),
            other => Err(CoreError::MismatchedSpaces(format!(
                "expected chain state, got {}",
                other.kind_name()
            ))),
        }
    }

    /// Short display used in report witness references.
    pub fn describe(&self) -> alloc::string::String {
        match self {
            MetricPoint::Spectral(s) => {
                let nz: Vec<_> = s
                    .coeffs()
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .take(4)
                    .map(|(i, c)| format!("{}:{:.6}", s.mode_at(i), c))
                    .collect();
                format!("spectral[{}]", nz.join(","))
            }
            MetricPoint::IntervalOrTail(RotationPoint::Interval(u)) => format!("interval({u})"),
            MetricPoint::IntervalOrTail(RotationPoint::Tail(n)) => format!("tail({n})"),
            MetricPoint::Unit(x) => format!("unit({x})"),
            MetricPoint::Chain(i) => format!("state({i})"),
        }
    }
}
