//! Invariant measures, Cesaro convergence, Birkhoff averages and
//! support inclusion.

use crate::error::{CoreError, Result};
use crate::math::{exp, normal_quantile, sqrt};
use crate::measure::ProbVector;
use crate::models::chain::FiniteChain;
use crate::models::heat::{HeatKernel, HeatModelParams};
use crate::observable::TestFunction;
use crate::rng::RngStream;
use crate::semigroup::SemigroupModel;
use crate::space::MetricPoint;
use crate::stats::CompensatedSum;
use alloc::format;
use alloc::vec::Vec;

/// Description of the model's ergodic measure.
#[derive(Debug, Clone)]
pub enum StationarySpec {
    /// Independent per-mode Gaussians `N(0, sigma_k^2 / (2 k^2))`;
    /// `variances[i]` follows the dense spectral layout. The support is
    /// the whole space whenever every variance is positive.
    HeatGaussian { variances: Vec<f64> },
    /// Exact stationary vector of a finite chain.
    ChainVector(ProbVector),
    /// Point mass at 0 (slide model).
    SlidePointMass,
    /// Uniform distribution on `[-1, 0]` (rotation model).
    RotationUniform,
}

/// Exact total-variation distance between `mu P` and `mu`.
pub fn invariant_residual(chain: &FiniteChain, mu: &ProbVector) -> Result<f64> {
    chain.step_distribution(mu)?.tv_distance(mu)
}

/// Stationary law of the heat model: independent modes
/// `N(0, sigma_k^2/(2k^2))`.
pub fn heat_stationary_law(params: &HeatModelParams) -> Result<StationarySpec> {
    let n = params.n_modes();
    let mut variances = Vec::with_capacity(2 * n);
    for a in 1..=n as i32 {
        variances.push(params.stationary_mode_variance(a)?);
    }
    for a in 1..=n as i32 {
        variances.push(params.stationary_mode_variance(-a)?);
    }
    Ok(StationarySpec::HeatGaussian { variances })
}

/// Draws one state from the stationary spec (testing aid).
pub fn sample_stationary(
    spec: &StationarySpec,
    params: &HeatModelParams,
    stream: RngStream,
) -> Result<MetricPoint> {
    match spec {
        StationarySpec::HeatGaussian { variances } => {
            use rand::Rng;
            use rand_distr::StandardNormal;
            let mut rng = stream.rng();
            let mut s = params.zero_state();
            for (i, c) in s.coeffs_mut().iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *c = sqrt(variances[i]) * z;
            }
            Ok(MetricPoint::Spectral(s))
        }
        _ => Err(CoreError::UnsupportedOperation(
            "stationary sampling is implemented for the heat model",
        )),
    }
}

/// Exact `W_1` between an empirical cloud on the line and `N(0, var)`,
/// via the quantile coupling at midpoint levels.
pub fn gaussian_quantile_w1(samples: &[f64], variance: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(CoreError::InvalidParameter("empty sample cloud".into()));
    }
    let n = samples.len();
    let sd = sqrt(variance);
    let mut sorted = samples.to_vec();
    crate::stats::sort_floats(&mut sorted);
    let mut acc = CompensatedSum::new();
    for (i, &x) in sorted.iter().enumerate() {
        let level = (i as f64 + 0.5) / n as f64;
        acc.add((x - sd * normal_quantile(level)).abs());
    }
    Ok(acc.value() / n as f64)
}

/// One point of a Cesaro convergence curve: horizon and divergence from
/// the reference measure.
#[derive(Debug, Clone, Copy)]
pub struct CesaroPoint {
    pub t: f64,
    pub divergence: f64,
}

/// Divergence of sampled (or exact) Cesaro averages `Q_t(x, .)` from the
/// reference, per horizon:
///
/// * heat: mean per-mode sorted-sample `W_1` against the exact Gaussian
///   quantiles, over modes `|k| <= mode_cap`;
/// * chains: exact total variation of the exact Cesaro average;
/// * slide: `W_1` of the sampled cloud against the point mass at 0;
/// * rotation: `W_1` of the embedded cloud against `U[-1, 0]` quantiles.
pub fn cesaro_convergence(
    model: &SemigroupModel,
    x: &MetricPoint,
    reference: &StationarySpec,
    t_grid: &[f64],
    n_samples: usize,
    mode_cap: usize,
    stream: RngStream,
) -> Result<Vec<CesaroPoint>> {
    if t_grid.is_empty() {
        return Err(CoreError::EmptyGrid("cesaro t grid"));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let s = stream.child(ti as u64);
        let divergence = match (model, reference) {
            (SemigroupModel::Heat(params), StationarySpec::HeatGaussian { variances }) => {
                let cloud = model.cesaro_sample(x, t, n_samples, s)?;
                let span = mode_cap.min(params.n_modes()).max(1);
                let mut acc = CompensatedSum::new();
                let mut count = 0usize;
                for k in 1..=span as i32 {
                    for signed in [k, -k] {
                        let xs: Vec<f64> = cloud
                            .points()
                            .map(|p| p.as_spectral().and_then(|st| st.mode(signed)))
                            .collect::<Result<_>>()?;
                        let idx = if signed > 0 {
                            (signed - 1) as usize
                        } else {
                            params.n_modes() + (-signed - 1) as usize
                        };
                        acc.add(gaussian_quantile_w1(&xs, variances[idx])?);
                        count += 1;
                    }
                }
                acc.value() / count as f64
            }
            (SemigroupModel::Chain(chain), StationarySpec::ChainVector(mu)) => {
                let nu = ProbVector::delta(chain.size(), x.as_chain()?);
                chain.exact_cesaro(&nu, t as u64)?.tv_distance(mu)?
            }
            (SemigroupModel::Slide(_), StationarySpec::SlidePointMass) => {
                let cloud = model.cesaro_sample(x, t, n_samples, s)?;
                let xs = cloud.embed(|p| p.as_unit().unwrap_or(f64::NAN));
                // W1 against delta_0 is the mean absolute coordinate
                let mut acc = CompensatedSum::new();
                for v in &xs {
                    acc.add(v.abs());
                }
                acc.value() / xs.len() as f64
            }
            (SemigroupModel::RotationTail(_), StationarySpec::RotationUniform) => {
                let cloud = model.cesaro_sample(x, t, n_samples, s)?;
                let mut xs = cloud.embed(|p| p.as_rotation().map(|r| r.embed()).unwrap_or(f64::NAN));
                crate::stats::sort_floats(&mut xs);
                let n = xs.len();
                let mut acc = CompensatedSum::new();
                for (i, &v) in xs.iter().enumerate() {
                    let q = -1.0 + (i as f64 + 0.5) / n as f64; // U[-1,0] quantile
                    acc.add((v - q).abs());
                }
                acc.value() / n as f64
            }
            _ => {
                return Err(CoreError::MismatchedSpaces(format!(
                    "reference does not match model {}",
                    model.label()
                )))
            }
        };
        out.push(CesaroPoint { t, divergence });
    }
    Ok(out)
}

/// Single-path time average of `f` along the unit-step skeleton:
/// `(1/T) sum_{i=1}^T f(X_i)`. Deterministic models walk their exact
/// orbit; stochastic ones sample one path with per-step transitions.
pub fn birkhoff_average(
    model: &SemigroupModel,
    f: &TestFunction,
    x: &MetricPoint,
    t_horizon: u64,
    stream: RngStream,
) -> Result<f64> {
    if t_horizon == 0 {
        return Err(CoreError::InvalidTime {
            t: 0.0,
            reason: "birkhoff average needs t >= 1",
        });
    }
    model.validate_point(x)?;
    let mut acc = CompensatedSum::new();
    match model {
        SemigroupModel::Heat(params) => {
            let kernel = HeatKernel::new(params, 1.0)?;
            let mut rng = stream.rng();
            let mut cur = x.as_spectral()?.clone();
            let mut next = params.zero_state();
            for _ in 0..t_horizon {
                kernel.sample_into(&cur, &mut rng, &mut next);
                core::mem::swap(&mut cur, &mut next);
                acc.add(f.eval(&MetricPoint::Spectral(cur.clone())));
            }
        }
        SemigroupModel::Chain(chain) => {
            let mut rng = stream.rng();
            let mut cur = x.as_chain()?;
            for _ in 0..t_horizon {
                cur = chain.sample_step(cur, &mut rng);
                acc.add(f.eval(&MetricPoint::Chain(cur)));
            }
        }
        SemigroupModel::RotationTail(params) => {
            let mut cur = x.as_rotation()?;
            for _ in 0..t_horizon {
                cur = params.step(cur);
                acc.add(f.eval(&MetricPoint::IntervalOrTail(cur)));
            }
        }
        SemigroupModel::Slide(_) => {
            let x0 = x.as_unit()?;
            for i in 1..=t_horizon {
                acc.add(f.eval(&MetricPoint::Unit((x0 - i as f64).max(0.0))));
            }
        }
    }
    Ok(acc.value() / t_horizon as f64)
}

/// Outcome of a support-inclusion sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportCheck {
    pub holds: bool,
    /// First `(t, state)` where mass left the support, if any.
    pub first_violation: Option<(u64, usize)>,
}

/// Checks `supp(nu P^t) ⊆ supp(mu)` for all `t <= t_max`, exactly.
///
/// Preconditions (rejected otherwise): `mu` is invariant within 1e-10
/// and `supp(nu) ⊆ supp(mu)`.
pub fn support_inclusion(
    chain: &FiniteChain,
    nu: &ProbVector,
    mu: &ProbVector,
    t_max: u64,
) -> Result<SupportCheck> {
    let residual = invariant_residual(chain, mu)?;
    if residual > 1e-10 {
        return Err(CoreError::PreconditionFailed(format!(
            "mu is not invariant: residual {residual}"
        )));
    }
    let support_atol = 1e-12;
    let outside: Vec<usize> = (0..mu.len())
        .filter(|&i| mu.entries()[i] <= support_atol)
        .collect();
    for &i in &outside {
        if nu.entries()[i] > support_atol {
            return Err(CoreError::PreconditionFailed(format!(
                "supp(nu) is not inside supp(mu): state {i}"
            )));
        }
    }
    let mut cur = nu.clone();
    for t in 1..=t_max {
        cur = chain.step_distribution(&cur)?;
        for &i in &outside {
            if cur.entries()[i] > support_atol {
                return Ok(SupportCheck {
                    holds: false,
                    first_violation: Some((t, i)),
                });
            }
        }
    }
    Ok(SupportCheck {
        holds: true,
        first_violation: None,
    })
}

/// Exact Cesaro mixture variance of one heat mode started at 0:
/// `(1/t) ∫_0^t sigma^2 (1 - e^{-2 k^2 s})/(2 k^2) ds`.
pub fn heat_cesaro_mode_variance(params: &HeatModelParams, k: i32, t: f64) -> Result<f64> {
    let sigma = params.sigma(k)?;
    let k2 = (k as f64) * (k as f64);
    if !(t > 0.0) {
        return Err(CoreError::InvalidTime {
            t,
            reason: "cesaro variance needs t > 0",
        });
    }
    let stationary = sigma * sigma / (2.0 * k2);
    Ok(stationary * (1.0 - (1.0 - exp(-2.0 * k2 * t)) / (2.0 * k2 * t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::rotation::RotationParams;
    use crate::models::slide::{SlideMetric, SlideParams};
    use crate::observable::{chain_observable, embedded_coordinate};
    use crate::stats::RunningMoments;
    use alloc::vec;
    use rand::Rng;

    fn random_positive_chain(n: usize, seed: u64) -> FiniteChain {
        let mut rng = RngStream::new(seed).rng();
        let rows = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|x| x / total).collect()
            })
            .collect();
        FiniteChain::new(rows).unwrap()
    }

    #[test]
    fn invariant_residual_examples() {
        // uniform is fixed by doubly stochastic chains
        let c = FiniteChain::new(vec![
            vec![0.2, 0.5, 0.3],
            vec![0.5, 0.3, 0.2],
            vec![0.3, 0.2, 0.5],
        ])
        .unwrap();
        assert!(invariant_residual(&c, &ProbVector::uniform(3)).unwrap() < 1e-14);
        // delta_0 on the swap chain moves all mass: residual 1
        let swap = FiniteChain::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(
            invariant_residual(&swap, &ProbVector::delta(2, 0)).unwrap(),
            1.0
        );
        // computed stationary vectors certify
        let c = random_positive_chain(5, 3);
        let mu = c.stationary(1e-13, 100_000).unwrap();
        assert!(invariant_residual(&c, &mu).unwrap() <= 1e-12);
    }

    #[test]
    fn stationary_law_values() {
        let params = HeatModelParams::with_default_sigma(4).unwrap();
        assert!((params.stationary_mode_variance(1).unwrap() - 0.5).abs() < 1e-15);
        let spec = heat_stationary_law(&params).unwrap();
        match spec {
            StationarySpec::HeatGaussian { variances } => {
                assert_eq!(variances.len(), 8);
                assert!((variances[0] - 0.5).abs() < 1e-15);
                // sigma_k = 1/k: variance = (1/k^2)/(2k^2) = 1/(2k^4)
                assert!((variances[3] - 1.0 / (2.0 * 256.0)).abs() < 1e-15);
            }
            _ => panic!("expected heat spec"),
        }
    }

    #[test]
    fn stationary_start_stays_stationary() {
        // moments at a later time match the stationary law within 4 se
        let params = HeatModelParams::with_default_sigma(4).unwrap();
        let model = SemigroupModel::Heat(params.clone());
        let spec = heat_stationary_law(&params).unwrap();
        let n = 10_000;
        let t = 0.37;
        let kernel = HeatKernel::new(&params, t).unwrap();
        let mut m1 = RunningMoments::new();
        for i in 0..n {
            let start = sample_stationary(&spec, &params, RngStream::new(40).child(i)).unwrap();
            let mut rng = RngStream::new(41).child(i).rng();
            let out = kernel.sample(start.as_spectral().unwrap(), &mut rng);
            m1.push(out.mode(1).unwrap());
        }
        let var = params.stationary_mode_variance(1).unwrap();
        let mean_se = sqrt(var / n as f64);
        assert!(m1.mean().abs() < 4.0 * mean_se);
        let var_se = var * sqrt(2.0 / (n as f64 - 1.0));
        assert!((m1.variance() - var).abs() < 4.0 * var_se);
        let _ = model;
    }

    #[test]
    fn cesaro_variance_closed_form() {
        let params = HeatModelParams::with_default_sigma(4).unwrap();
        // (1/t)∫ (1-e^{-2s})/2 ds = 1/2 - (1-e^{-2t})/(4t) for k=1, sigma=1
        let t = 50.0;
        let direct = 0.5 - (1.0 - exp(-100.0)) / 200.0;
        assert!((heat_cesaro_mode_variance(&params, 1, t).unwrap() - direct).abs() < 1e-15);
        // quadrature oracle
        let m = 200_000;
        let mut acc = 0.0;
        for i in 0..m {
            let s = (i as f64 + 0.5) * t / m as f64;
            acc += (1.0 - exp(-2.0 * s)) / 2.0 * (t / m as f64);
        }
        assert!((heat_cesaro_mode_variance(&params, 1, t).unwrap() - acc / t).abs() < 1e-9);
    }

    #[test]
    fn heat_mode_one_cesaro_variance_matches_sampled_cloud() {
        let params = HeatModelParams::with_default_sigma(8).unwrap();
        let model = SemigroupModel::Heat(params.clone());
        let x = MetricPoint::Spectral(params.zero_state());
        let t = 50.0;
        let cloud = model.cesaro_sample(&x, t, 4000, RngStream::new(42)).unwrap();
        let xs: Vec<f64> = cloud
            .points()
            .map(|p| p.as_spectral().unwrap().mode(1).unwrap())
            .collect();
        let var = crate::stats::sample_variance(&xs);
        let expect = heat_cesaro_mode_variance(&params, 1, t).unwrap();
        // variance of the sample variance ~ var^2 * 2/n
        assert!(
            (var - expect).abs() < 4.0 * expect * sqrt(2.0 / 4000.0),
            "{var} vs {expect}"
        );
    }

    #[test]
    fn chain_cesaro_tv_decreases() {
        let c = random_positive_chain(3, 7);
        let mu = c.stationary(1e-13, 100_000).unwrap();
        let model = SemigroupModel::Chain(c);
        let reference = StationarySpec::ChainVector(mu);
        let grid: Vec<f64> = (1..=8).map(|i| (i * 25) as f64).collect();
        let curve = cesaro_convergence(
            &model,
            &MetricPoint::Chain(0),
            &reference,
            &grid,
            1,
            1,
            RngStream::new(50),
        )
        .unwrap();
        for w in curve.windows(2) {
            assert!(w[1].divergence <= w[0].divergence + 1e-12);
        }
    }

    #[test]
    fn slide_cesaro_closed_form() {
        // W1(Q_t(x,.), delta_0) = x^2/(2t) for t >= x
        let model = SemigroupModel::Slide(SlideParams::new(SlideMetric::Rho));
        let x = 0.3;
        let t = 2.0;
        let curve = cesaro_convergence(
            &model,
            &MetricPoint::Unit(x),
            &StationarySpec::SlidePointMass,
            &[t],
            60_000,
            1,
            RngStream::new(51),
        )
        .unwrap();
        let expect = x * x / (2.0 * t);
        assert!(
            (curve[0].divergence - expect).abs() < 3e-3,
            "{} vs {expect}",
            curve[0].divergence
        );
    }

    #[test]
    fn birkhoff_rotation_mean_is_uniform() {
        let model = SemigroupModel::RotationTail(RotationParams::with_default_gamma());
        let f = embedded_coordinate(2.0);
        let avg = birkhoff_average(
            &model,
            &f,
            &MetricPoint::IntervalOrTail(crate::space::RotationPoint::Interval(-0.3)),
            100_000,
            RngStream::new(52),
        )
        .unwrap();
        assert!((avg + 0.5).abs() < 0.01, "avg {avg}");
    }

    #[test]
    fn birkhoff_slide_absorbs() {
        let model = SemigroupModel::Slide(SlideParams::new(SlideMetric::Rho));
        let f = embedded_coordinate(1.0);
        let x = 0.9;
        let t = 100u64;
        let avg = birkhoff_average(&model, &f, &MetricPoint::Unit(x), t, RngStream::new(53))
            .unwrap();
        // error bounded by x * 2 sup|f| / t
        assert!(avg.abs() <= x * 2.0 / t as f64);
    }

    #[test]
    fn birkhoff_swap_chain_alternates() {
        let swap = FiniteChain::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let model = SemigroupModel::Chain(swap);
        let f = chain_observable(vec![0.0, 1.0]);
        let avg = birkhoff_average(&model, &f, &MetricPoint::Chain(0), 10, RngStream::new(54))
            .unwrap();
        assert_eq!(avg, 0.5); // even horizon on the period-2 orbit
    }

    #[test]
    fn birkhoff_matches_exact_cesaro_on_chains() {
        // path average within 5 sqrt(Var/t) of <f, Q_t(x,.)> for most seeds
        let c = random_positive_chain(4, 11);
        let model = SemigroupModel::Chain(c.clone());
        let f_vals = vec![0.0, 0.3, 0.7, 1.0];
        let f = chain_observable(f_vals.clone());
        let t = 2000u64;
        let q = c.exact_cesaro(&ProbVector::delta(4, 0), t).unwrap();
        let expect = q.expect(&f_vals).unwrap();
        let var = {
            let m2 = q
                .entries()
                .iter()
                .zip(&f_vals)
                .map(|(p, v)| p * v * v)
                .sum::<f64>();
            m2 - expect * expect
        };
        let bound = 5.0 * sqrt(var / t as f64);
        let mut hits = 0;
        let total = 100;
        for seed in 0..total {
            let avg = birkhoff_average(
                &model,
                &f,
                &MetricPoint::Chain(0),
                t,
                RngStream::new(60).child(seed),
            )
            .unwrap();
            if (avg - expect).abs() <= bound {
                hits += 1;
            }
        }
        assert!(hits >= 95, "only {hits}/{total} seeds inside the band");
    }

    #[test]
    fn support_inclusion_examples() {
        // state 2 is transient into the closed class {0,1}
        let chain = FiniteChain::new(vec![
            vec![0.6, 0.4, 0.0],
            vec![0.3, 0.7, 0.0],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap();
        let mu = chain.stationary(1e-14, 200_000).unwrap();
        assert!(mu.entries()[2] <= 1e-12);
        let check =
            support_inclusion(&chain, &ProbVector::delta(3, 0), &mu, 1000).unwrap();
        assert!(check.holds);

        // nu charging the transient state violates the precondition
        assert!(support_inclusion(&chain, &ProbVector::delta(3, 2), &mu, 10).is_err());

        // identity chain: everything is invariant, nothing moves
        let id = FiniteChain::identity(3);
        let check = support_inclusion(&id, &ProbVector::delta(3, 1), &ProbVector::uniform(3), 10)
            .unwrap();
        assert!(check.holds);

        // non-invariant mu rejected
        let swap = FiniteChain::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(
            support_inclusion(&swap, &ProbVector::delta(2, 0), &ProbVector::delta(2, 0), 5)
                .is_err()
        );
    }

    #[test]
    fn gaussian_quantile_w1_of_matching_cloud_is_small() {
        // quantile midpoints of the target law itself
        let var = 0.5;
        let n = 2000;
        let xs: Vec<f64> = (0..n)
            .map(|i| sqrt(var) * normal_quantile((i as f64 + 0.5) / n as f64))
            .collect();
        assert!(gaussian_quantile_w1(&xs, var).unwrap() < 1e-12);
    }

    #[test]
    fn exact_cesaro_linearity() {
        let c = random_positive_chain(4, 13);
        let a = ProbVector::delta(4, 0);
        let b = ProbVector::delta(4, 2);
        let alpha = 0.3;
        let mix = ProbVector::new(
            a.entries()
                .iter()
                .zip(b.entries())
                .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
                .collect(),
        )
        .unwrap();
        let t = 57;
        let qa = c.exact_cesaro(&a, t).unwrap();
        let qb = c.exact_cesaro(&b, t).unwrap();
        let qm = c.exact_cesaro(&mix, t).unwrap();
        for i in 0..4 {
            let lin = alpha * qa.entries()[i] + (1.0 - alpha) * qb.entries()[i];
            assert!((qm.entries()[i] - lin).abs() < 1e-14);
        }
    }
}
