//! Empirical measures and exact probability vectors.

use crate::error::{CoreError, Result};
use crate::observable::TestFunction;
use crate::space::MetricPoint;
use crate::stats::{CompensatedSum, RunningMoments};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Weighted sample cloud approximating a probability measure.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    samples: Vec<(f64, MetricPoint)>,
}

impl EmpiricalMeasure {
    /// Equal-weight cloud (`1/n` each).
    pub fn from_points(points: Vec<MetricPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(CoreError::InvalidParameter(
                "empirical measure needs at least one sample".into(),
            ));
        }
        let w = 1.0 / points.len() as f64;
        let m = Self {
            samples: points.into_iter().map(|p| (w, p)).collect(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn from_weighted(samples: Vec<(f64, MetricPoint)>) -> Result<Self> {
        let m = Self { samples };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[(f64, MetricPoint)] {
        &self.samples
    }

    pub fn points(&self) -> impl Iterator<Item = &MetricPoint> {
        self.samples.iter().map(|(_, p)| p)
    }

    /// Checks positive weights summing to one and a single state-space kind.
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(CoreError::InvalidParameter("empty measure".into()));
        }
        let mut total = CompensatedSum::new();
        for (w, _) in &self.samples {
            if !(*w > 0.0) {
                return Err(CoreError::InvalidParameter(format!(
                    "nonpositive weight {w}"
                )));
            }
            total.add(*w);
        }
        if (total.value() - 1.0).abs() > 1e-12 {
            return Err(CoreError::InvalidParameter(format!(
                "weights sum to {} (must be 1 within 1e-12)",
                total.value()
            )));
        }
        let kind = self.samples[0].1.kind_name();
        if self.samples.iter().any(|(_, p)| p.kind_name() != kind) {
            return Err(CoreError::MismatchedSpaces(
                "mixed state-space kinds in one measure".into(),
            ));
        }
        Ok(())
    }

    /// Weighted mean of `f` over the cloud.
    pub fn integrate(&self, f: &TestFunction) -> f64 {
        let mut acc = CompensatedSum::new();
        for (w, p) in &self.samples {
            acc.add(w * f.eval(p));
        }
        acc.value()
    }

    /// Moments of `f` (meaningful for equal-weight clouds).
    pub fn moments(&self, f: &TestFunction) -> RunningMoments {
        let mut m = RunningMoments::new();
        for (_, p) in &self.samples {
            m.push(f.eval(p));
        }
        m
    }

    /// Applies a real embedding to every sample.
    pub fn embed(&self, embed: impl Fn(&MetricPoint) -> f64) -> Vec<f64> {
        self.samples.iter().map(|(_, p)| embed(p)).collect()
    }
}

/// Exact finite distribution (used by the chain model and the
/// decomposition construction).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    entries: Vec<f64>,
}

impl ProbVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        let v = Self { entries };
        v.validate()?;
        Ok(v)
    }

    /// Point mass at state `i`.
    pub fn delta(n: usize, i: usize) -> Self {
        let mut entries = vec![0.0; n];
        entries[i] = 1.0;
        Self { entries }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            entries: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(CoreError::InvalidParameter(
                "empty probability vector".into(),
            ));
        }
        if self.entries.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(CoreError::InvalidParameter(
                "negative or non-finite probability entry".into(),
            ));
        }
        let total = crate::stats::sum(&self.entries);
        if (total - 1.0).abs() > 1e-12 {
            return Err(CoreError::InvalidParameter(format!(
                "probability entries sum to {total} (must be 1 within 1e-12)"
            )));
        }
        Ok(())
    }

    /// Mass on a state subset.
    pub fn mass_on(&self, subset: &[usize]) -> f64 {
        let mut acc = CompensatedSum::new();
        for &i in subset {
            acc.add(self.entries[i]);
        }
        acc.value()
    }

    /// Total-variation distance `sup_A |mu(A) - nu(A)| = 0.5 * l1`.
    pub fn tv_distance(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return Err(CoreError::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        let mut acc = CompensatedSum::new();
        for (a, b) in self.entries.iter().zip(&other.entries) {
            acc.add((a - b).abs());
        }
        Ok(0.5 * acc.value())
    }

    /// States with mass above `atol`.
    pub fn support(&self, atol: f64) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > atol)
            .map(|(i, _)| i)
            .collect()
    }

    /// Expectation of a state-indexed payoff.
    pub fn expect(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(CoreError::DimensionMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        Ok(crate::stats::dot(&self.entries, values))
    }
}
