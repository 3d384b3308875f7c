//! Bounded Lipschitz test functions.

use crate::error::{CoreError, Result};
use crate::semigroup::SemigroupModel;
use crate::space::MetricPoint;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;

type EvalFn = dyn Fn(&MetricPoint) -> f64 + Send + Sync;

/// An observable `f` with a declared Lipschitz constant and sup bound.
#[derive(Clone)]
pub struct TestFunction {
    label: String,
    lip_constant: f64,
    sup_bound: f64,
    eval: Arc<EvalFn>,
}

impl core::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("TestFunction")
            .field("label", &self.label)
            .field("lip_constant", &self.lip_constant)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl TestFunction {
    pub fn new(
        label: impl Into<String>,
        lip_constant: f64,
        sup_bound: f64,
        eval: impl Fn(&MetricPoint) -> f64 + Send + Sync + 'static,
    ) -> Self {
        assert!(lip_constant >= 0.0 && sup_bound >= 0.0);
        Self {
            label: label.into(),
            lip_constant,
            sup_bound,
            eval: Arc::new(eval),
        }
    }

    #[inline]
    pub fn eval(&self, x: &MetricPoint) -> f64 {
        (self.eval)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lip_constant(&self) -> f64 {
        self.lip_constant
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Returns `f + c` (same Lipschitz constant, shifted bound).
    #[must_use]
    pub fn shifted(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            label: format!("{}+{}", self.label, c),
            lip_constant: self.lip_constant,
            sup_bound: self.sup_bound + c.abs(),
            eval: Arc::new(move |x| inner(x) + c),
        }
    }

    /// Spot-checks `|f(a)| <= sup_bound` on the given points.
    pub fn check_bound(&self, points: &[MetricPoint]) -> Result<()> {
        for p in points {
            let v = self.eval(p);
            if v.abs() > self.sup_bound + 1e-12 {
                return Err(CoreError::PreconditionFailed(format!(
                    "|f({})| = {v} exceeds sup bound {}",
                    p.describe(),
                    self.sup_bound
                )));
            }
        }
        Ok(())
    }

    /// Spot-checks the Lipschitz estimate on sampled pairs.
    pub fn check_lipschitz(
        &self,
        model: &SemigroupModel,
        pairs: &[(MetricPoint, MetricPoint)],
    ) -> Result<()> {
        for (a, b) in pairs {
            let d = model.distance(a, b)?;
            let gap = (self.eval(a) - self.eval(b)).abs();
            if gap > self.lip_constant * d + 1e-9 {
                return Err(CoreError::PreconditionFailed(format!(
                    "|f(a)-f(b)| = {gap} exceeds {} * {d}",
                    self.lip_constant
                )));
            }
        }
        Ok(())
    }
}

/// `f(x) = min(distance(x, anchor), cap)`, Lipschitz constant 1.
pub fn distance_to(model: &SemigroupModel, anchor: MetricPoint, cap: f64) -> TestFunction {
    let model = model.clone();
    let label = format!("min(dist(.,{}),{cap})", anchor.describe());
    TestFunction::new(label, 1.0, cap, move |x| {
        model
            .distance(x, &anchor)
            .map(|d| d.min(cap))
            .unwrap_or(f64::NAN)
    })
}

/// Coordinate of the canonical real embedding, clamped to `[-cap, cap]`.
pub fn embedded_coordinate(cap: f64) -> TestFunction {
    TestFunction::new("coordinate", 1.0, cap, move |x| {
        let v = match x {
            MetricPoint::Unit(u) => *u,
            MetricPoint::IntervalOrTail(p) => p.embed(),
            MetricPoint::Chain(i) => *i as f64,
            MetricPoint::Spectral(s) => s.mode(1).unwrap_or(f64::NAN),
        };
        v.clamp(-cap, cap)
    })
}

/// Coefficient of one spectral mode, clamped to `[-cap, cap]`.
pub fn mode_coefficient(k: i32, cap: f64) -> TestFunction {
    TestFunction::new(format!("mode{k}"), 1.0, cap, move |x| match x {
        MetricPoint::Spectral(s) => s.mode(k).unwrap_or(f64::NAN).clamp(-cap, cap),
        _ => f64::NAN,
    })
}

/// A finite-chain observable given by one value per state. The Lipschitz
/// constant refers to the discrete metric, i.e. `max spread`.
pub fn chain_observable(values: alloc::vec::Vec<f64>) -> TestFunction {
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let spread = values
        .iter()
        .flat_map(|a| values.iter().map(move |b| (a - b).abs()))
        .fold(0.0f64, f64::max);
    TestFunction::new("chain-values", spread, sup, move |x| match x {
        MetricPoint::Chain(i) => values.get(*i).copied().unwrap_or(f64::NAN),
        _ => f64::NAN,
    })
}

/// `sin` of the H1 norm of a spectral state; bounded by 1, not Lipschitz
/// in L2 (that failure is the point of the counterexample it drives).
pub fn sin_h1_norm() -> TestFunction {
    TestFunction::new("sin(|.|_H1)", f64::INFINITY, 1.0, |x| match x {
        MetricPoint::Spectral(s) => crate::math::sin(s.h1_norm()),
        _ => f64::NAN,
    })
}
