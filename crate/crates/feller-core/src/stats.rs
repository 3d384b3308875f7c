//! Compensated accumulation for Monte-Carlo estimates.

use crate::math::sqrt;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

/// Compensated dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = CompensatedSum::new();
    for (&x, &y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.value()
}

/// Running mean / standard-error accumulator with compensated sums.
#[derive(Debug, Clone, Default)]
pub struct RunningMoments {
    count: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        self.sum.add(value);
        self.sum_sq.add(value * value);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.sum.value() / self.count as f64
    }

    /// Unbiased sample variance; 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.mean();
        let raw = (self.sum_sq.value() - n * mean * mean) / (n - 1.0);
        raw.max(0.0)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        sqrt(self.variance() / self.count as f64)
    }
}

/// Collects per-sample values when the caller also needs the raw cloud.
pub fn moments_of(values: &[f64]) -> RunningMoments {
    let mut m = RunningMoments::new();
    for &v in values {
        m.push(v);
    }
    m
}

/// Sorts a slice of finite floats ascending (total order).
pub fn sort_floats(values: &mut [f64]) {
    values.sort_unstable_by(f64::total_cmp);
}

/// Empirical variance of a cloud (population denominator `n - 1`).
pub fn sample_variance(values: &[f64]) -> f64 {
    moments_of(values).variance()
}

/// Mean of a cloud via compensated summation.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    sum(values) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_handles_cancellation() {
        // 1 + 1e16 - 1e16 collapses to 0 with naive accumulation order.
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        acc.add(1e16);
        acc.add(-1e16);
        assert_eq!(acc.value(), 1.0);
    }

    #[test]
    fn moments_match_direct_formulas() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let m = moments_of(&xs);
        assert_eq!(m.mean(), 2.5);
        let var = xs.iter().map(|x| (x - 2.5) * (x - 2.5)).sum::<f64>() / 3.0;
        assert!((m.variance() - var).abs() < 1e-15);
        assert!((m.std_error() - sqrt(var / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn uniform_weights_sum_to_one() {
        let n = 100_000;
        let w = 1.0 / n as f64;
        let mut acc = CompensatedSum::new();
        for _ in 0..n {
            acc.add(w);
        }
        assert!((acc.value() - 1.0).abs() < 1e-12);
    }
}
