//! Exact Wasserstein-1 distances between empirical measures.
//!
//! One-dimensional embeddings use the exact sorted-sample (equal counts)
//! or CDF-merge (general weights) formulas. Everything else goes through
//! an exact optimal assignment on the cost matrix, capped at
//! [`EXACT_MATCHING_CAP`] samples.

use crate::error::{CoreError, Result};
use crate::measure::EmpiricalMeasure;
use crate::semigroup::SemigroupModel;
use crate::space::MetricPoint;
use crate::stats::CompensatedSum;
use alloc::vec;
use alloc::vec::Vec;

/// Largest cloud size accepted by the general-metric matching path.
pub const EXACT_MATCHING_CAP: usize = 512;

/// Exact `W_1` between equal-count samples on the line: mean absolute
/// difference of the sorted samples.
pub fn sorted_pairs(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(CoreError::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.is_empty() {
        return Err(CoreError::InvalidParameter("empty sample lists".into()));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    crate::stats::sort_floats(&mut a);
    crate::stats::sort_floats(&mut b);
    let mut acc = CompensatedSum::new();
    for (x, y) in a.iter().zip(&b) {
        acc.add((x - y).abs());
    }
    Ok(acc.value() / a.len() as f64)
}

/// Exact `W_1` on the line for arbitrary weighted supports:
/// integral of `|F_A - F_B|` over the merged support.
pub fn weighted_1d(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(CoreError::InvalidParameter("empty sample lists".into()));
    }
    // merge events: (position, weight_a, weight_b)
    let mut events: Vec<(f64, f64, f64)> = a.iter().map(|&(w, x)| (x, w, 0.0)).collect();
    events.extend(b.iter().map(|&(w, x)| (x, 0.0, w)));
    events.sort_unstable_by(|p, q| p.0.total_cmp(&q.0));
    let mut acc = CompensatedSum::new();
    let mut cdf_gap = CompensatedSum::new();
    let mut i = 0;
    while i < events.len() {
        let x = events[i].0;
        // fold ties
        while i < events.len() && events[i].0 == x {
            cdf_gap.add(events[i].1);
            cdf_gap.add(-events[i].2);
            i += 1;
        }
        if i < events.len() {
            acc.add(cdf_gap.value().abs() * (events[i].0 - x));
        }
    }
    Ok(acc.value())
}

/// Exact minimum-cost perfect matching (Jonker-Volgenant style shortest
/// augmenting paths, O(n^3)). `cost` is row-major `n x n`.
pub fn assignment_cost(n: usize, cost: &[f64]) -> f64 {
    debug_assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    // 1-based with a virtual column 0
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched = vec![0usize; n + 1]; // matched[j] = row assigned to column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = CompensatedSum::new();
    for j in 1..=n {
        total.add(cost[(matched[j] - 1) * n + (j - 1)]);
    }
    total.value()
}

/// Isometric embedding on the line, when one exists. For spectral states
/// the embedding only exists when every point across both clouds
/// populates one shared mode (`shared_mode` threads that constraint).
fn embed_1d(model: &SemigroupModel, p: &MetricPoint, shared_mode: &mut Option<usize>) -> Option<f64> {
    match (model, p) {
        (SemigroupModel::Slide(params), MetricPoint::Unit(x)) => {
            // the `d` metric is not the line metric; 1 is isolated
            match params.metric() {
                crate::models::slide::SlideMetric::Rho => Some(*x),
                crate::models::slide::SlideMetric::D => None,
            }
        }
        (SemigroupModel::RotationTail(_), MetricPoint::IntervalOrTail(r)) => Some(r.embed()),
        (SemigroupModel::Heat(_), MetricPoint::Spectral(s)) => {
            let mut nz = s.coeffs().iter().enumerate().filter(|(_, c)| **c != 0.0);
            match (nz.next(), nz.next()) {
                (None, _) => Some(0.0),
                (Some((i, c)), None) => match *shared_mode {
                    None => {
                        *shared_mode = Some(i);
                        Some(*c)
                    }
                    Some(j) if j == i => Some(*c),
                    _ => None,
                },
                _ => None,
            }
        }
        _ => None,
    }
}

/// Exact `W_1(A, B)` with respect to the model metric.
///
/// Symmetric by construction and zero iff the sample multisets coincide.
pub fn wasserstein1(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    model: &SemigroupModel,
) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    for p in a.points().chain(b.points()) {
        model.validate_point(p)?;
    }

    // 1-D path: every point embeds isometrically on the line.
    let embedded: Option<(Vec<f64>, Vec<f64>)> = {
        let mut shared = None;
        let ea: Option<Vec<f64>> = a.points().map(|p| embed_1d(model, p, &mut shared)).collect();
        let eb: Option<Vec<f64>> = b.points().map(|p| embed_1d(model, p, &mut shared)).collect();
        match (ea, eb) {
            (Some(xa), Some(xb)) => Some((xa, xb)),
            _ => None,
        }
    };
    if let Some((xa, xb)) = embedded {
        if xa.len() == xb.len() {
            return sorted_pairs(&xa, &xb);
        }
        let wa: Vec<(f64, f64)> = a.samples().iter().map(|(w, _)| *w).zip(xa).collect();
        let wb: Vec<(f64, f64)> = b.samples().iter().map(|(w, _)| *w).zip(xb).collect();
        return weighted_1d(&wa, &wb);
    }

    // General path: exact matching of equal-count clouds.
    let n = a.len();
    if n != b.len() {
        return Err(CoreError::MismatchedSpaces(
            "general-metric W1 needs equal sample counts".into(),
        ));
    }
    if n > EXACT_MATCHING_CAP {
        return Err(CoreError::MatchingCapExceeded {
            n,
            cap: EXACT_MATCHING_CAP,
        });
    }
    // canonical argument order keeps the result bitwise symmetric
    let swap = cloud_key(b) < cloud_key(a);
    let (first, second) = if swap { (b, a) } else { (a, b) };
    let mut cost = vec![0.0f64; n * n];
    for (i, (_, p)) in first.samples().iter().enumerate() {
        for (j, (_, q)) in second.samples().iter().enumerate() {
            cost[i * n + j] = model.distance(p, q)?;
        }
    }
    Ok(assignment_cost(n, &cost) / n as f64)
}

fn cloud_key(m: &EmpiricalMeasure) -> Vec<u64> {
    let mut key = Vec::new();
    for (_, p) in m.samples() {
        match p {
            MetricPoint::Spectral(s) => key.extend(s.coeffs().iter().map(|c| c.to_bits())),
            MetricPoint::IntervalOrTail(r) => key.push(r.embed().to_bits()),
            MetricPoint::Unit(x) => key.push(x.to_bits()),
            MetricPoint::Chain(i) => key.push(*i as u64),
        }
    }
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::slide::{SlideMetric, SlideParams};
    use proptest::prelude::*;

    fn unit_measure(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_points(xs.iter().map(|&x| MetricPoint::Unit(x)).collect()).unwrap()
    }

    fn slide_rho() -> SemigroupModel {
        SemigroupModel::Slide(SlideParams::new(SlideMetric::Rho))
    }

    #[test]
    fn identical_lists_have_zero_distance() {
        let a = unit_measure(&[0.1, 0.9, 0.4]);
        assert_eq!(wasserstein1(&a, &a, &slide_rho()).unwrap(), 0.0);
    }

    #[test]
    fn two_point_transport() {
        let a = unit_measure(&[0.0]);
        let b = unit_measure(&[1.0]);
        assert_eq!(wasserstein1(&a, &b, &slide_rho()).unwrap(), 1.0);
    }

    #[test]
    fn sorted_difference_oracle() {
        // {0, 1} vs {0.5, 0.5}: each endpoint moves to the midpoint,
        // cost (0.5 + 0.5)/2 = 0.5.
        let a = unit_measure(&[0.0, 1.0]);
        let b = unit_measure(&[0.5, 0.5]);
        assert_eq!(wasserstein1(&a, &b, &slide_rho()).unwrap(), 0.5);
    }

    #[test]
    fn weighted_cdf_matches_sorted_on_uniform_weights() {
        let xs = [0.1, 0.7, 0.4, 0.2];
        let ys = [0.3, 0.9, 0.05, 0.6];
        let sp = sorted_pairs(&xs, &ys).unwrap();
        let wa: Vec<_> = xs.iter().map(|&x| (0.25, x)).collect();
        let wb: Vec<_> = ys.iter().map(|&x| (0.25, x)).collect();
        let cdf = weighted_1d(&wa, &wb).unwrap();
        assert!((sp - cdf).abs() < 1e-14);
    }

    #[test]
    fn unequal_counts_fall_back_to_cdf() {
        let a = unit_measure(&[0.0, 1.0]);
        let b = unit_measure(&[0.5]);
        // W1({0,1}/2, delta at 0.5) = 0.5
        assert!((wasserstein1(&a, &b, &slide_rho()).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn slide_d_metric_goes_through_matching() {
        let d = SemigroupModel::Slide(SlideParams::new(SlideMetric::D));
        let a = unit_measure(&[0.999, 0.2]);
        let b = unit_measure(&[1.0, 0.2]);
        // the point 1 is at distance 1 from everything else
        assert_eq!(wasserstein1(&a, &b, &d).unwrap(), 0.5);
    }

    #[test]
    fn matching_cap_is_enforced() {
        let many: Vec<_> = (0..EXACT_MATCHING_CAP + 1)
            .map(|i| MetricPoint::Unit((i as f64 / 600.0).min(1.0)))
            .collect();
        let a = EmpiricalMeasure::from_points(many.clone()).unwrap();
        let b = EmpiricalMeasure::from_points(many).unwrap();
        let d = SemigroupModel::Slide(SlideParams::new(SlideMetric::D));
        match wasserstein1(&a, &b, &d) {
            Err(CoreError::MatchingCapExceeded { .. }) => {}
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    // Brute-force assignment oracle: enumerate all permutations.
    fn brute_force_assignment(n: usize, cost: &[f64]) -> f64 {
        fn rec(n: usize, cost: &[f64], used: &mut [bool], row: usize, acc: f64, best: &mut f64) {
            if row == n {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(n, cost, used, row + 1, acc + cost[row * n + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(n, cost, &mut vec![false; n], 0, 0.0, &mut best);
        best
    }

    proptest! {
        #[test]
        fn assignment_matches_brute_force(n in 1usize..6, seed in 0u64..1000) {
            let mut rng = crate::rng::RngStream::new(seed).rng();
            use rand::Rng;
            let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
            let fast = assignment_cost(n, &cost);
            let slow = brute_force_assignment(n, &cost);
            prop_assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }

        #[test]
        fn w1_symmetry_and_triangle(seed in 0u64..500) {
            let mut rng = crate::rng::RngStream::new(seed).rng();
            use rand::Rng;
            let n = 1 + (rng.random::<u64>() % 12) as usize;
            let cloud = |rng: &mut rand_chacha::ChaCha8Rng| {
                unit_measure(&(0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>())
            };
            let a = cloud(&mut rng);
            let b = cloud(&mut rng);
            let c = cloud(&mut rng);
            let m = slide_rho();
            let ab = wasserstein1(&a, &b, &m).unwrap();
            let ba = wasserstein1(&b, &a, &m).unwrap();
            prop_assert_eq!(ab, ba);
            let ac = wasserstein1(&a, &c, &m).unwrap();
            let cb = wasserstein1(&c, &b, &m).unwrap();
            prop_assert!(ab <= ac + cb + 1e-9);
        }

        #[test]
        fn matching_symmetry_general_metric(seed in 0u64..200) {
            let mut rng = crate::rng::RngStream::new(seed).rng();
            use rand::Rng;
            let n = 1 + (rng.random::<u64>() % 8) as usize;
            let d = SemigroupModel::Slide(SlideParams::new(SlideMetric::D));
            let cloud = |rng: &mut rand_chacha::ChaCha8Rng| {
                unit_measure(&(0..n).map(|_| {
                    if rng.random::<f64>() < 0.2 { 1.0 } else { rng.random::<f64>() * 0.99 }
                }).collect::<Vec<_>>())
            };
            let a = cloud(&mut rng);
            let b = cloud(&mut rng);
            let ab = wasserstein1(&a, &b, &d).unwrap();
            let ba = wasserstein1(&b, &a, &d).unwrap();
            prop_assert_eq!(ab, ba);
        }
    }
}
