//! Rotation with an attached tail: the deterministic dynamics
//! `T(u) = u + gamma mod 1` on `[-1, 0]`, `T(1/n) = 1/(n-1)` for `n >= 2`,
//! `T(1) = 0`. Not Feller: the images of the tail points `1/n -> 0`
//! accumulate at 0, while `T(0) = gamma` sits elsewhere.

use crate::error::{CoreError, Result};
use crate::space::RotationPoint;
use alloc::format;

/// Parameters of the rotation-with-tail model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationParams {
    gamma: f64,
    n_max: u32,
}

impl RotationParams {
    pub fn new(gamma: f64, n_max: u32) -> Result<Self> {
        if !(-1.0 < gamma && gamma < 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "rotation angle {gamma} must lie in (-1, 0)"
            )));
        }
        if n_max < 10_000 {
            return Err(CoreError::InvalidParameter(format!(
                "n_max {n_max} must be >= 10^4"
            )));
        }
        Ok(Self { gamma, n_max })
    }

    /// Default angle `-1/sqrt(2)` (stored as a double; the orbit behaves
    /// like an irrational rotation at every horizon this crate explores).
    pub fn with_default_gamma() -> Self {
        Self {
            gamma: -core::f64::consts::FRAC_1_SQRT_2,
            n_max: 10_000,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Validated tail point `1/n`.
    pub fn tail(&self, n: u32) -> Result<RotationPoint> {
        if n == 0 || n > self.n_max {
            return Err(CoreError::InvalidParameter(format!(
                "tail index {n} outside 1..={}",
                self.n_max
            )));
        }
        Ok(RotationPoint::Tail(n))
    }

    /// One step of the dynamics. The mod-1 representative is kept in
    /// `[-1, 0]`: when `u + gamma` drops below -1 the image wraps by +1.
    pub fn step(&self, p: RotationPoint) -> RotationPoint {
        match p {
            RotationPoint::Tail(1) => RotationPoint::Interval(0.0),
            RotationPoint::Tail(n) => RotationPoint::Tail(n - 1),
            RotationPoint::Interval(u) => {
                let v = u + self.gamma;
                RotationPoint::Interval(if v >= -1.0 { v } else { v + 1.0 })
            }
        }
    }

    /// `steps`-fold iterate of [`Self::step`].
    pub fn iterate(&self, p: RotationPoint, steps: u64) -> RotationPoint {
        let mut cur = p;
        let mut remaining = steps;
        if let RotationPoint::Tail(n) = cur {
            let hop = remaining.min(n as u64 - 1);
            cur = RotationPoint::Tail(n - hop as u32);
            remaining -= hop;
            if remaining > 0 {
                cur = self.step(cur); // Tail(1) -> Interval(0)
                remaining -= 1;
            }
        }
        for _ in 0..remaining {
            cur = self.step(cur);
        }
        cur
    }
}
