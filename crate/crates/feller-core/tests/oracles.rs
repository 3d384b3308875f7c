//! Cross-checks of Monte-Carlo estimators against exactly computable
//! oracles.

use feller_core::decomposition;
use feller_core::math::exp;
use feller_core::models::chain::FiniteChain;
use feller_core::models::heat::{self, HeatModelParams};
use feller_core::observable::{chain_observable, mode_coefficient};
use feller_core::regularity::{self, ProbePlan, ProbeRule, W1Mode};
use feller_core::rng::RngStream;
use feller_core::space::{MetricPoint, SpectralState};
use feller_core::SemigroupModel;
use rand::Rng;

fn random_chain(n: usize, stream: RngStream) -> FiniteChain {
    let mut rng = stream.rng();
    let rows = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| 0.02 + rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|x| x / total).collect()
        })
        .collect();
    FiniteChain::new(rows).unwrap()
}

#[test]
fn chain_monte_carlo_dual_tracks_exact_dual() {
    // 1000 randomized trials: the sampled dual sits within 3 standard
    // errors of the exact matrix-power dual in at least 99% of them.
    let root = RngStream::new(2024);
    let mut hits = 0usize;
    let trials = 1000usize;
    for trial in 0..trials {
        let s = root.child(trial as u64);
        let mut rng = s.child(0).rng();
        let n = 2 + (rng.random::<u64>() % 7) as usize;
        let chain = random_chain(n, s.child(1));
        let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let f = chain_observable(values.clone());
        let x = (rng.random::<u64>() % n as u64) as usize;
        let t = 1 + (rng.random::<u64>() % 12);
        let exact = chain.exact_dual(&values, t).unwrap()[x];
        let model = SemigroupModel::Chain(chain);
        let (est, se) = model
            .estimate_dual(&f, &MetricPoint::Chain(x), t as f64, 400, s.child(2))
            .unwrap();
        // guard against se collapsing on (near-)deterministic duals
        let tol = 3.0 * se + 1e-9;
        if (est - exact).abs() <= tol {
            hits += 1;
        }
    }
    assert!(hits >= 990, "only {hits}/{trials} trials inside 3 se");
}

#[test]
fn counterexample_scan_limits() {
    // both starting laws approach the same stationary law at large t
    let params = HeatModelParams::with_default_sigma(16).unwrap();
    let phi = heat::inverse_mode_state(16);
    let zero = params.zero_state();
    let scan =
        heat::counterexample_scan(&params, &phi, &zero, &[6.0], 4000, RngStream::new(5)).unwrap();
    let p = &scan[0];
    let joint = 3.0 * (p.se_phi + p.se_phi_tilde);
    assert!(
        (p.estimate_phi - p.estimate_phi_tilde).abs() <= joint,
        "{} vs {} (joint 3se {joint})",
        p.estimate_phi,
        p.estimate_phi_tilde
    );

    // an H1 starting point freezes to sin(|phi|_H1) as t drops to 0
    let smooth = SpectralState::from_modes(16, &[(1, 0.9), (-2, 0.2)]).unwrap();
    let scan =
        heat::counterexample_scan(&params, &smooth, &zero, &[1e-9], 4000, RngStream::new(6))
            .unwrap();
    let want = feller_core::math::sin(smooth.h1_norm());
    let p = &scan[0];
    assert!(
        (p.estimate_phi - want).abs() <= 3.0 * p.se_phi + 1e-6,
        "{} vs {want}",
        p.estimate_phi
    );
}

#[test]
fn heat_eventual_modulus_obeys_contraction_bound() {
    // restricting the sup to t >= t_min shrinks the bound to e^{-t_min} r
    let model = SemigroupModel::Heat(HeatModelParams::with_default_sigma(8).unwrap());
    let center = MetricPoint::Spectral(SpectralState::zero(8));
    let plan = ProbePlan {
        center: center.clone(),
        radii: vec![0.5, 0.25],
        probes_per_radius: 4,
        rule: ProbeRule::HeatLowMode { max_mode: 4 },
    };
    let f = feller_core::observable::distance_to(&model, center, 5.0);
    let t_min = 2.0;
    let grid: Vec<f64> = (0..12).map(|i| 0.2 + 3.6 * i as f64 / 11.0).collect();
    let report = regularity::eventual_e_modulus(
        &model,
        &f,
        &plan,
        &[t_min],
        &grid,
        400,
        RngStream::new(7),
    )
    .unwrap();
    for cell in &report.cells {
        let bound = exp(-t_min) * cell.radius + 6.0 * cell.std_error;
        assert!(
            cell.modulus <= bound + 1e-12,
            "radius {}: modulus {} above bound {bound}",
            cell.radius,
            cell.modulus
        );
    }
}

#[test]
fn heat_mixing_gap_obeys_contraction_bound() {
    let model = SemigroupModel::Heat(HeatModelParams::with_default_sigma(8).unwrap());
    let x = MetricPoint::Spectral(SpectralState::from_modes(8, &[(1, 1.0)]).unwrap());
    let y = MetricPoint::Spectral(SpectralState::from_modes(8, &[(1, -0.5)]).unwrap());
    let d = model.distance(&x, &y).unwrap();
    let f = feller_core::observable::distance_to(
        &model,
        MetricPoint::Spectral(SpectralState::zero(8)),
        5.0,
    );
    let windows = [(1.0, 2.0), (2.0, 4.0)];
    let grid: Vec<f64> = (0..16).map(|i| 1.0 + 3.0 * i as f64 / 15.0).collect();
    let gaps = regularity::mixing_gap(
        &model,
        &f,
        &x,
        &y,
        &windows,
        &grid,
        600,
        RngStream::new(8),
    )
    .unwrap();
    for g in &gaps {
        let bound = exp(-g.window.0) * d + 6.0 * g.std_error;
        assert!(g.gap <= bound + 1e-12, "window {:?}: {} > {bound}", g.window, g.gap);
    }
    // later windows shrink
    assert!(gaps[1].gap <= gaps[0].gap + 3.0 * (gaps[0].std_error + gaps[1].std_error));
}

#[test]
fn heat_stability_mode_projection_tracks_coupled_decay() {
    // project to mode 1: W1 <= e^{-t} |x1 - y1| + sampling error
    let model = SemigroupModel::Heat(HeatModelParams::with_default_sigma(8).unwrap());
    let x = MetricPoint::Spectral(SpectralState::from_modes(8, &[(1, 2.0)]).unwrap());
    let y = MetricPoint::Spectral(SpectralState::zero(8));
    let grid = [0.5, 1.0, 2.0, 3.0];
    let curve = regularity::stability_gap(
        &model,
        &x,
        &y,
        &grid,
        4000,
        W1Mode::ProjectMode(1),
        RngStream::new(9),
    )
    .unwrap();
    for &(t, w1) in &curve {
        // the clouds are independent N(m_x, v) vs N(m_y, v) samples:
        // W1 concentrates near |m_x - m_y| = 2 e^{-t}; allow generous
        // sampling slack ~ 4 sd / sqrt(n)
        let mean_gap = 2.0 * exp(-t);
        let sd = feller_core::math::sqrt(0.5);
        let slack = 5.0 * sd / feller_core::math::sqrt(4000.0);
        assert!(w1 <= mean_gap + slack, "t={t}: {w1} vs {mean_gap}+{slack}");
    }
    // identical starts: W1 bounded by pure sampling noise
    let same = regularity::stability_gap(
        &model,
        &x,
        &x,
        &[1.0],
        4000,
        W1Mode::ProjectMode(1),
        RngStream::new(10),
    )
    .unwrap();
    let stationary_sd = feller_core::math::sqrt(0.5);
    assert!(same[0].1 <= 5.0 * stationary_sd / feller_core::math::sqrt(4000.0));
}

#[test]
fn heat_strong_continuity_deficit_vanishes() {
    // f = sin(mode-1 coefficient): the mode law is continuous at t = 0
    let model = SemigroupModel::Heat(HeatModelParams::with_default_sigma(8).unwrap());
    let f = {
        let inner = mode_coefficient(1, 100.0);
        feller_core::TestFunction::new("sin-mode1", 1.0, 1.0, move |p| {
            feller_core::math::sin(inner.eval(p))
        })
    };
    let probes = vec![
        MetricPoint::Spectral(SpectralState::zero(8)),
        MetricPoint::Spectral(SpectralState::from_modes(8, &[(1, 1.2)]).unwrap()),
        MetricPoint::Spectral(SpectralState::from_modes(8, &[(1, -0.4), (2, 0.8)]).unwrap()),
    ];
    let grid = [1e-6, 1e-4, 1e-2, 0.1];
    let curve =
        regularity::strong_continuity_deficit(&model, &f, &grid, &probes, 2000, RngStream::new(11))
            .unwrap();
    // decays toward 0 as t drops: compare the largest and smallest t
    assert!(curve[0].deficit <= 3.0 * curve[0].std_error + 1e-3);
    assert!(curve[0].deficit < curve[3].deficit + 3.0 * curve[3].std_error);
}

#[test]
fn decomposition_scales_to_larger_chains() {
    // size 32, k = 10: residual still at the 1e-10 scale
    let chain = random_chain(32, RngStream::new(31));
    let mu = chain.stationary(1e-13, 1_000_000).unwrap();
    let subset: Vec<usize> = (0..16).collect();
    let alpha = 0.5 * mu.mass_on(&subset);
    let mut trace =
        decomposition::build_decomposition(&chain, 3, &subset, alpha, 10, 10_000).unwrap();
    let residual = decomposition::verify_telescoping(&chain, &mut trace).unwrap();
    assert!(residual <= 1e-10, "residual {residual}");
}
