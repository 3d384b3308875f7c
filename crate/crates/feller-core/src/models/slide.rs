//! Slide semigroup `S_t(x) = (x - t)+` on `[0, 1]`, under the Euclidean
//! metric `rho` or the incomplete metric `d` that isolates the point 1.

use crate::error::{CoreError, Result};
use alloc::format;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlideMetric {
    /// Euclidean `|x - y|`.
    Rho,
    /// `d(x,y) = |x-y|` on `[0,1)`, `d(x,1) = d(1,x) = 1`, `d(1,1) = 0`.
    /// `([0,1], d)` is not complete.
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlideParams {
    metric: SlideMetric,
}

impl SlideParams {
    pub fn new(metric: SlideMetric) -> Self {
        Self { metric }
    }

    pub fn metric(&self) -> SlideMetric {
        self.metric
    }

    pub fn validate_point(&self, x: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(CoreError::InvalidParameter(format!(
                "slide state {x} outside [0, 1]"
            )));
        }
        Ok(())
    }

    pub fn distance(&self, x: f64, y: f64) -> f64 {
        match self.metric {
            SlideMetric::Rho => (x - y).abs(),
            SlideMetric::D => {
                let x_is_one = x == 1.0;
                let y_is_one = y == 1.0;
                if x_is_one && y_is_one {
                    0.0
                } else if x_is_one || y_is_one {
                    1.0
                } else {
                    (x - y).abs()
                }
            }
        }
    }
}

/// `S_t(x) = max(x - t, 0)`.
pub fn slide_flow(x: f64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(CoreError::InvalidParameter(format!(
            "slide state {x} outside [0, 1]"
        )));
    }
    if !(t >= 0.0) {
        return Err(CoreError::InvalidTime {
            t,
            reason: "slide flow needs t >= 0",
        });
    }
    Ok((x - t).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flow_formula() {
        assert!((slide_flow(0.7, 0.3).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(slide_flow(0.2, 0.5).unwrap(), 0.0);
        assert_eq!(slide_flow(1.0, 0.0).unwrap(), 1.0);
        assert!(slide_flow(1.5, 0.0).is_err());
        assert!(slide_flow(0.5, -1.0).is_err());
    }

    #[test]
    fn metric_d_isolates_one() {
        let d = SlideParams::new(SlideMetric::D);
        assert_eq!(d.distance(0.999, 1.0), 1.0);
        assert_eq!(d.distance(1.0, 0.0), 1.0);
        assert_eq!(d.distance(1.0, 1.0), 0.0);
        assert!((d.distance(0.3, 0.7) - 0.4).abs() < 1e-15);
        let rho = SlideParams::new(SlideMetric::Rho);
        assert!((rho.distance(0.3, 0.7) - 0.4).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn flow_is_one_lipschitz_in_state_and_time(
            x in 0.0..=1.0f64,
            y in 0.0..=1.0f64,
            t in 0.0..=2.0f64,
            s in 0.0..=2.0f64,
        ) {
            // ulp slack: the clamp arguments are rounded subtractions
            let fx = slide_flow(x, t).unwrap();
            let fy = slide_flow(y, t).unwrap();
            prop_assert!((fx - fy).abs() <= (x - y).abs() + 1e-15);
            let ft = slide_flow(x, s).unwrap();
            prop_assert!((fx - ft).abs() <= (t - s).abs() + 1e-15);
        }
    }
}
