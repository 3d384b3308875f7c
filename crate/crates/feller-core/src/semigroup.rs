//! The model enum and the operations every experiment builds on:
//! metric, transition sampling, common-noise coupling, Monte-Carlo duals
//! and Cesaro sampling.

use crate::error::{CoreError, Result};
use crate::math::is_nonneg_integer;
use crate::measure::EmpiricalMeasure;
use crate::models::chain::FiniteChain;
use crate::models::heat::{HeatKernel, HeatModelParams};
use crate::models::rotation::RotationParams;
use crate::models::slide::{slide_flow, SlideParams};
use crate::observable::TestFunction;
use crate::rng::RngStream;
use crate::space::{MetricPoint, RotationPoint};
use crate::stats::RunningMoments;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeKind {
    Discrete,
    Continuous,
}

/// One of the four model semigroups.
#[derive(Debug, Clone)]
pub enum SemigroupModel {
    Heat(HeatModelParams),
    RotationTail(RotationParams),
    Slide(SlideParams),
    Chain(FiniteChain),
}

impl SemigroupModel {
    pub fn time_kind(&self) -> TimeKind {
        match self {
            SemigroupModel::Heat(_) | SemigroupModel::Slide(_) => TimeKind::Continuous,
            SemigroupModel::RotationTail(_) | SemigroupModel::Chain(_) => TimeKind::Discrete,
        }
    }

    /// Deterministic dynamics ignore the random stream entirely.
    pub fn is_deterministic(&self) -> bool {
        matches!(
            self,
            SemigroupModel::RotationTail(_) | SemigroupModel::Slide(_)
        )
    }

    pub fn label(&self) -> String {
        match self {
            SemigroupModel::Heat(p) => format!("heat(N={})", p.n_modes()),
            SemigroupModel::RotationTail(p) => format!("rotation(gamma={})", p.gamma()),
            SemigroupModel::Slide(p) => format!("slide({:?})", p.metric()),
            SemigroupModel::Chain(c) => format!("chain(n={})", c.size()),
        }
    }

    pub fn validate_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(CoreError::InvalidTime {
                t,
                reason: "time must be finite and >= 0",
            });
        }
        if self.time_kind() == TimeKind::Discrete && !is_nonneg_integer(t) {
            return Err(CoreError::InvalidTime {
                t,
                reason: "discrete-time model needs integer t",
            });
        }
        Ok(())
    }

    pub fn validate_point(&self, x: &MetricPoint) -> Result<()> {
        match (self, x) {
            (SemigroupModel::Heat(p), MetricPoint::Spectral(s)) => {
                s.validate()?;
                if s.max_mode() != p.n_modes() {
                    return Err(CoreError::DimensionMismatch {
                        expected: p.n_modes(),
                        got: s.max_mode(),
                    });
                }
                Ok(())
            }
            (SemigroupModel::RotationTail(p), MetricPoint::IntervalOrTail(r)) => {
                r.validate()?;
                if let RotationPoint::Tail(n) = r {
                    if *n > p.n_max() {
                        return Err(CoreError::InvalidParameter(format!(
                            "tail index {n} exceeds n_max {}",
                            p.n_max()
                        )));
                    }
                }
                Ok(())
            }
            (SemigroupModel::Slide(p), MetricPoint::Unit(u)) => p.validate_point(*u),
            (SemigroupModel::Chain(c), MetricPoint::Chain(i)) => {
                if *i >= c.size() {
                    return Err(CoreError::InvalidParameter(format!(
                        "chain state {i} outside 0..{}",
                        c.size()
                    )));
                }
                Ok(())
            }
            (model, point) => Err(CoreError::MismatchedSpaces(format!(
                "{} point in {} model",
                point.kind_name(),
                model.label()
            ))),
        }
    }

    /// The model's metric.
    ///
    /// Heat: L2 norm of the coefficient difference. Rotation/slide:
    /// Euclidean distance of the canonical real embeddings (slide under
    /// the `d` metric isolates the point 1). Chains: discrete metric.
    pub fn distance(&self, a: &MetricPoint, b: &MetricPoint) -> Result<f64> {
        self.validate_point(a)?;
        self.validate_point(b)?;
        match self {
            SemigroupModel::Heat(_) => a.as_spectral()?.l2_distance(b.as_spectral()?),
            SemigroupModel::RotationTail(_) => {
                Ok((a.as_rotation()?.embed() - b.as_rotation()?.embed()).abs())
            }
            SemigroupModel::Slide(p) => Ok(p.distance(a.as_unit()?, b.as_unit()?)),
            SemigroupModel::Chain(_) => {
                Ok(if a.as_chain()? == b.as_chain()? { 0.0 } else { 1.0 })
            }
        }
    }

    /// One draw from `P_t delta_x`. Deterministic models ignore `stream`.
    pub fn sample_transition(
        &self,
        x: &MetricPoint,
        t: f64,
        stream: RngStream,
    ) -> Result<MetricPoint> {
        self.validate_point(x)?;
        self.validate_time(t)?;
        match self {
            SemigroupModel::Heat(p) => {
                let kernel = HeatKernel::new(p, t)?;
                let mut rng = stream.rng();
                Ok(MetricPoint::Spectral(
                    kernel.sample(x.as_spectral()?, &mut rng),
                ))
            }
            SemigroupModel::RotationTail(p) => Ok(MetricPoint::IntervalOrTail(
                p.iterate(x.as_rotation()?, t as u64),
            )),
            SemigroupModel::Slide(_) => Ok(MetricPoint::Unit(slide_flow(x.as_unit()?, t)?)),
            SemigroupModel::Chain(c) => {
                let mut rng = stream.rng();
                Ok(MetricPoint::Chain(c.sample_path_end(
                    x.as_chain()?,
                    t as u64,
                    &mut rng,
                )))
            }
        }
    }

    /// Common-noise draw from two starting points. Defined for the heat
    /// model, where both outputs share the identical noise and the gap
    /// contracts mode-wise.
    pub fn coupled_transition(
        &self,
        x: &MetricPoint,
        y: &MetricPoint,
        t: f64,
        stream: RngStream,
    ) -> Result<(MetricPoint, MetricPoint)> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        self.validate_time(t)?;
        match self {
            SemigroupModel::Heat(p) => {
                let kernel = HeatKernel::new(p, t)?;
                let mut rng = stream.rng();
                let (a, b) = kernel.sample_coupled(x.as_spectral()?, y.as_spectral()?, &mut rng);
                Ok((MetricPoint::Spectral(a), MetricPoint::Spectral(b)))
            }
            _ => Err(CoreError::UnsupportedOperation(
                "coupled transitions are defined for the heat model only",
            )),
        }
    }

    /// Monte-Carlo estimate of `P_t f(x)` with standard error. For
    /// deterministic models one evaluation suffices and the error is 0.
    pub fn estimate_dual(
        &self,
        f: &TestFunction,
        x: &MetricPoint,
        t: f64,
        n_samples: usize,
        stream: RngStream,
    ) -> Result<(f64, f64)> {
        self.validate_point(x)?;
        self.validate_time(t)?;
        if self.is_deterministic() {
            let y = self.sample_transition(x, t, stream)?;
            return Ok((f.eval(&y), 0.0));
        }
        if n_samples < 2 {
            return Err(CoreError::InvalidParameter(
                "estimate_dual needs n_samples >= 2".into(),
            ));
        }
        let mut acc = RunningMoments::new();
        match self {
            SemigroupModel::Heat(p) => {
                let kernel = HeatKernel::new(p, t)?;
                let phi = x.as_spectral()?;
                let mut rng = stream.rng();
                let mut holder =
                    MetricPoint::Spectral(crate::space::SpectralState::zero(phi.max_mode()));
                for _ in 0..n_samples {
                    if let MetricPoint::Spectral(out) = &mut holder {
                        kernel.sample_into(phi, &mut rng, out);
                    }
                    acc.push(f.eval(&holder));
                }
            }
            SemigroupModel::Chain(c) => {
                let i = x.as_chain()?;
                let mut rng = stream.rng();
                for _ in 0..n_samples {
                    let j = c.sample_path_end(i, t as u64, &mut rng);
                    acc.push(f.eval(&MetricPoint::Chain(j)));
                }
            }
            _ => unreachable!("deterministic models handled above"),
        }
        Ok((acc.mean(), acc.std_error()))
    }

    /// Draws the uniform Cesaro time: `{1, ..., t}` for discrete models,
    /// `(0, t]` for continuous ones.
    fn sample_cesaro_time(&self, t: f64, rng: &mut impl Rng) -> f64 {
        match self.time_kind() {
            TimeKind::Discrete => {
                let horizon = t as u64;
                1.0 + (rng.random_range(0..horizon)) as f64
            }
            TimeKind::Continuous => {
                let u: f64 = rng.random();
                t * (1.0 - u) // in (0, t]
            }
        }
    }

    /// Unbiased sampler of the Cesaro average `Q_t(x, .)`: each sample
    /// first draws a uniform time, then one transition at that time.
    pub fn cesaro_sample(
        &self,
        x: &MetricPoint,
        t: f64,
        n_samples: usize,
        stream: RngStream,
    ) -> Result<EmpiricalMeasure> {
        self.validate_point(x)?;
        self.validate_time(t)?;
        let min_t = match self.time_kind() {
            TimeKind::Discrete => 1.0,
            TimeKind::Continuous => f64::MIN_POSITIVE,
        };
        if t < min_t {
            return Err(CoreError::InvalidTime {
                t,
                reason: "cesaro horizon must be >= 1 (discrete) or > 0 (continuous)",
            });
        }
        if n_samples == 0 {
            return Err(CoreError::InvalidParameter(
                "cesaro_sample needs n_samples >= 1".into(),
            ));
        }
        let mut points = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            let child = stream.child(i as u64);
            let s = self.sample_cesaro_time(t, &mut child.child(0).rng());
            points.push(self.sample_transition(x, s, child.child(1))?);
        }
        EmpiricalMeasure::from_points(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::heat::HeatModelParams;
    use crate::models::slide::SlideMetric;
    use crate::observable::chain_observable;
    use crate::space::SpectralState;
    use alloc::vec;

    fn heat(n: usize) -> SemigroupModel {
        SemigroupModel::Heat(HeatModelParams::with_default_sigma(n).unwrap())
    }

    #[test]
    fn distances_match_spec_examples() {
        let rho = SemigroupModel::Slide(SlideParams::new(SlideMetric::Rho));
        assert!(
            (rho.distance(&MetricPoint::Unit(0.3), &MetricPoint::Unit(0.7))
                .unwrap()
                - 0.4)
                .abs()
                < 1e-15
        );
        let d = SemigroupModel::Slide(SlideParams::new(SlideMetric::D));
        assert_eq!(
            d.distance(&MetricPoint::Unit(0.999), &MetricPoint::Unit(1.0))
                .unwrap(),
            1.0
        );
        let h = heat(4);
        let a = MetricPoint::Spectral(SpectralState::from_modes(4, &[(1, 3.0)]).unwrap());
        let b = MetricPoint::Spectral(SpectralState::zero(4));
        assert_eq!(h.distance(&a, &b).unwrap(), 3.0);
        // mismatched kinds
        assert!(h.distance(&a, &MetricPoint::Unit(0.0)).is_err());
    }

    #[test]
    fn transitions_match_spec_examples() {
        let slide = SemigroupModel::Slide(SlideParams::new(SlideMetric::Rho));
        let out = slide
            .sample_transition(&MetricPoint::Unit(0.7), 0.3, RngStream::new(0))
            .unwrap();
        assert!((out.as_unit().unwrap() - 0.4).abs() < 1e-15);

        let rot = SemigroupModel::RotationTail(RotationParams::with_default_gamma());
        let out = rot
            .sample_transition(
                &MetricPoint::IntervalOrTail(RotationPoint::Tail(5)),
                1.0,
                RngStream::new(0),
            )
            .unwrap();
        assert_eq!(out.as_rotation().unwrap(), RotationPoint::Tail(4));
        // non-integer time rejected on discrete models
        assert!(rot
            .sample_transition(
                &MetricPoint::IntervalOrTail(RotationPoint::Tail(5)),
                0.5,
                RngStream::new(0)
            )
            .is_err());

        let h = heat(4);
        let phi = MetricPoint::Spectral(SpectralState::from_modes(4, &[(2, 1.25)]).unwrap());
        let out = h.sample_transition(&phi, 0.0, RngStream::new(9)).unwrap();
        assert_eq!(out, phi); // identity at t = 0

        assert!(h.sample_transition(&phi, -1.0, RngStream::new(0)).is_err());
    }

    #[test]
    fn transitions_are_reproducible() {
        let h = heat(8);
        let phi = MetricPoint::Spectral(SpectralState::from_modes(8, &[(1, 1.0)]).unwrap());
        let s = RngStream::new(123).child(4);
        let a = h.sample_transition(&phi, 0.7, s).unwrap();
        let b = h.sample_transition(&phi, 0.7, s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn permutation_chain_dual_is_exact() {
        let c = SemigroupModel::Chain(
            FiniteChain::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
        );
        let f = chain_observable(vec![0.0, 1.0]);
        let (est, se) = c
            .estimate_dual(&f, &MetricPoint::Chain(0), 3.0, 64, RngStream::new(1))
            .unwrap();
        assert_eq!(est, 1.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn heat_dual_zero_mean_and_l2_moment() {
        let model = heat(16);
        let zero = MetricPoint::Spectral(SpectralState::zero(16));
        let f1 = crate::observable::mode_coefficient(1, 100.0);
        let t = 0.8;
        let n = 4000;
        let (est, se) = model
            .estimate_dual(&f1, &zero, t, n, RngStream::new(21))
            .unwrap();
        assert!(est.abs() <= 3.0 * se, "mean {est} vs se {se}");

        // E ||psi||_L2^2 = sum_k sigma_k^2 (1-e^{-2k^2 t})/(2k^2).
        let f2 = TestFunction::new("l2sq", f64::INFINITY, f64::INFINITY, |p| match p {
            MetricPoint::Spectral(s) => {
                let n = s.l2_norm();
                n * n
            }
            _ => f64::NAN,
        });
        let (est, se) = model
            .estimate_dual(&f2, &zero, t, n, RngStream::new(22))
            .unwrap();
        let mut oracle = 0.0;
        for k in 1..=16i32 {
            let v = crate::models::heat::heat_mode_law(
                match &model {
                    SemigroupModel::Heat(p) => p,
                    _ => unreachable!(),
                },
                k,
                0.0,
                t,
            )
            .unwrap()
            .variance;
            oracle += 2.0 * v; // modes +-k
        }
        assert!(
            (est - oracle).abs() <= 3.0 * se,
            "estimate {est} vs oracle {oracle} (se {se})"
        );
    }

    #[test]
    fn cesaro_slide_lands_on_flow_values() {
        let slide = SemigroupModel::Slide(SlideParams::new(SlideMetric::Rho));
        let m = slide
            .cesaro_sample(&MetricPoint::Unit(0.5), 2.0, 200, RngStream::new(3))
            .unwrap();
        for p in m.points() {
            let v = p.as_unit().unwrap();
            assert!((0.0..=0.5).contains(&v));
        }
        // identity chain: all cesaro samples stay at the start.
        let id = SemigroupModel::Chain(FiniteChain::identity(3));
        let m = id
            .cesaro_sample(&MetricPoint::Chain(2), 50.0, 100, RngStream::new(4))
            .unwrap();
        assert!(m.points().all(|p| p.as_chain().unwrap() == 2));
    }

    #[test]
    fn cesaro_rotation_long_run_mean_is_uniform() {
        // Orbit equidistribution: the empirical mean of the embedded
        // coordinate under Q_t(x, .) approaches -1/2.
        let rot = SemigroupModel::RotationTail(RotationParams::with_default_gamma());
        let x = MetricPoint::IntervalOrTail(RotationPoint::Interval(-0.3));
        let m = rot
            .cesaro_sample(&x, 1e5, 10_000, RngStream::new(7))
            .unwrap();
        let mean = crate::stats::mean(&m.embed(|p| p.as_rotation().unwrap().embed()));
        assert!((mean + 0.5).abs() < 0.01, "mean {mean}");
    }
}
