//! Spectral stochastic heat equation on the torus.
//!
//! The solution decomposes over Fourier modes into independent
//! one-dimensional Ornstein-Uhlenbeck processes:
//!
//! `X_k(t) = phi_k e^{-k^2 t} + sigma_k \int_0^t e^{-k^2 (t-s)} dB_k(s)`,
//!
//! so a time-`t` transition draws each mode from a Gaussian with mean
//! `phi_k e^{-k^2 t}` and variance `sigma_k^2 (1 - e^{-2 k^2 t}) / (2 k^2)`.
//! Sampling is exact; there is no time discretization anywhere.

use crate::error::{CoreError, Result};
use crate::math::{exp, sqrt};
use crate::rng::RngStream;
use crate::space::SpectralState;
use crate::stats::{CompensatedSum, RunningMoments};
use alloc::format;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

/// Noise amplitude rule `sigma_k`, `1 <= |k| <= N` (`sigma_0 = 0` is
/// implicit: mode 0 is structurally absent from the state space).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaRule {
    /// `sigma_k = scale / |k|^exponent`; square-summable iff exponent > 1/2.
    PowerLaw { scale: f64, exponent: f64 },
}

impl SigmaRule {
    pub fn value(&self, k: i32) -> f64 {
        match *self {
            SigmaRule::PowerLaw { scale, exponent } => {
                scale / crate::math::pow(k.unsigned_abs() as f64, exponent)
            }
        }
    }

    /// Validates square-summability of the rule as `N -> infinity`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            SigmaRule::PowerLaw { scale, exponent } => {
                if !(scale >= 0.0) || !scale.is_finite() {
                    return Err(CoreError::InvalidParameter(format!(
                        "sigma scale {scale} must be finite and >= 0"
                    )));
                }
                if !(exponent > 0.5) {
                    return Err(CoreError::InvalidParameter(format!(
                        "sigma exponent {exponent} must exceed 1/2 for sum sigma_k^2 < infinity"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Parameters of the truncated spectral heat model.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatModelParams {
    n_modes: usize,
    rule: SigmaRule,
    sigmas: Vec<f64>, // sigma_{|k|} for |k| = 1..N
}

impl HeatModelParams {
    pub fn new(n_modes: usize, rule: SigmaRule) -> Result<Self> {
        if n_modes == 0 {
            return Err(CoreError::InvalidParameter(
                "mode cutoff N must be >= 1".into(),
            ));
        }
        rule.validate()?;
        let sigmas = (1..=n_modes as i32).map(|k| rule.value(k)).collect();
        Ok(Self {
            n_modes,
            rule,
            sigmas,
        })
    }

    /// Default noise rule `sigma_k = 1/|k|`.
    pub fn with_default_sigma(n_modes: usize) -> Result<Self> {
        Self::new(
            n_modes,
            SigmaRule::PowerLaw {
                scale: 1.0,
                exponent: 1.0,
            },
        )
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn rule(&self) -> SigmaRule {
        self.rule
    }

    pub fn sigma(&self, k: i32) -> Result<f64> {
        let a = k.unsigned_abs() as usize;
        if k == 0 || a > self.n_modes {
            return Err(CoreError::InvalidParameter(format!(
                "mode {k} outside 1 <= |k| <= {}",
                self.n_modes
            )));
        }
        Ok(self.sigmas[a - 1])
    }

    pub fn zero_state(&self) -> SpectralState {
        SpectralState::zero(self.n_modes)
    }

    /// Stationary variance of mode `k`: `sigma_k^2 / (2 k^2)`.
    pub fn stationary_mode_variance(&self, k: i32) -> Result<f64> {
        let s = self.sigma(k)?;
        let k2 = (k as f64) * (k as f64);
        Ok(s * s / (2.0 * k2))
    }
}

/// Gaussian law of one mode at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianModeLaw {
    pub mean: f64,
    pub variance: f64,
}

/// Exact transition law of mode `k` started from `phi_k` after time `t`.
pub fn heat_mode_law(
    params: &HeatModelParams,
    k: i32,
    phi_k: f64,
    t: f64,
) -> Result<GaussianModeLaw> {
    if !(t >= 0.0) {
        return Err(CoreError::InvalidTime {
            t,
            reason: "heat transitions need t >= 0",
        });
    }
    let sigma = params.sigma(k)?;
    let k2 = (k as f64) * (k as f64);
    Ok(GaussianModeLaw {
        mean: phi_k * exp(-k2 * t),
        variance: sigma * sigma * (1.0 - exp(-2.0 * k2 * t)) / (2.0 * k2),
    })
}

/// Per-mode decay factors and noise standard deviations at a fixed time,
/// shared by every transition drawn at that time.
#[derive(Debug, Clone)]
pub struct HeatKernel {
    t: f64,
    decay: Vec<f64>, // e^{-k^2 t} for |k| = 1..N
    sd: Vec<f64>,    // sqrt(variance) for |k| = 1..N
}

impl HeatKernel {
    pub fn new(params: &HeatModelParams, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(CoreError::InvalidTime {
                t,
                reason: "heat transitions need t >= 0",
            });
        }
        let n = params.n_modes;
        let mut decay = Vec::with_capacity(n);
        let mut sd = Vec::with_capacity(n);
        for a in 1..=n {
            let k2 = (a * a) as f64;
            let sigma = params.sigmas[a - 1];
            decay.push(exp(-k2 * t));
            sd.push(sqrt(sigma * sigma * (1.0 - exp(-2.0 * k2 * t)) / (2.0 * k2)));
        }
        Ok(Self { t, decay, sd })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    #[inline]
    fn factors(&self, i: usize, half: usize) -> (f64, f64) {
        let a = if i < half { i } else { i - half };
        (self.decay[a], self.sd[a])
    }

    /// One exact draw from `P_t delta_phi`, written into `out`.
    pub fn sample_into(
        &self,
        phi: &SpectralState,
        rng: &mut impl Rng,
        out: &mut SpectralState,
    ) {
        let half = phi.max_mode();
        debug_assert_eq!(half, self.decay.len());
        debug_assert_eq!(out.max_mode(), half);
        let src = phi.coeffs();
        let dst = out.coeffs_mut();
        for i in 0..src.len() {
            let (decay, sd) = self.factors(i, half);
            let z: f64 = rng.sample(StandardNormal);
            dst[i] = src[i] * decay + sd * z;
        }
    }

    pub fn sample(&self, phi: &SpectralState, rng: &mut impl Rng) -> SpectralState {
        let mut out = SpectralState::zero(phi.max_mode());
        self.sample_into(phi, rng, &mut out);
        out
    }

    /// Applies the kernel with a caller-supplied standard-normal vector
    /// (the common-random-number path: several starting points share one
    /// `noise`).
    pub fn apply_with_noise(&self, phi: &SpectralState, noise: &[f64], out: &mut SpectralState) {
        let half = phi.max_mode();
        debug_assert_eq!(noise.len(), 2 * half);
        let src = phi.coeffs();
        let dst = out.coeffs_mut();
        for i in 0..src.len() {
            let (decay, sd) = self.factors(i, half);
            dst[i] = src[i] * decay + sd * noise[i];
        }
    }

    /// Common-noise draw from both starting points: the same `z` drives
    /// both outputs, so the per-mode gap decays deterministically by
    /// `e^{-k^2 t}`.
    pub fn sample_coupled(
        &self,
        phi: &SpectralState,
        psi: &SpectralState,
        rng: &mut impl Rng,
    ) -> (SpectralState, SpectralState) {
        let half = phi.max_mode();
        let mut a = SpectralState::zero(half);
        let mut b = SpectralState::zero(half);
        {
            let pa = phi.coeffs();
            let pb = psi.coeffs();
            let da = a.coeffs_mut();
            let db = b.coeffs_mut();
            for i in 0..pa.len() {
                let (decay, sd) = self.factors(i, half);
                let z: f64 = rng.sample(StandardNormal);
                let noise = sd * z;
                da[i] = pa[i] * decay + noise;
                db[i] = pb[i] * decay + noise;
            }
        }
        (a, b)
    }
}

/// `||A(t)||_{H^1}` for the deterministic part `A(t) = e^{t Delta} phi`:
/// `||A(t)||^2 = sum_k phi_k^2 k^2 e^{-2 k^2 t}`. Exhibits the blow-up
/// `t -> 0` for starting points outside `H^1`.
pub fn deterministic_h1_profile(phi: &SpectralState, t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if t_grid.is_empty() {
        return Err(CoreError::EmptyGrid("h1 profile t grid"));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t > 0.0) {
            return Err(CoreError::InvalidTime {
                t,
                reason: "h1 profile needs t > 0",
            });
        }
        let mut acc = CompensatedSum::new();
        for (i, &c) in phi.coeffs().iter().enumerate() {
            let k = phi.mode_at(i) as f64;
            acc.add(c * c * k * k * exp(-2.0 * k * k * t));
        }
        out.push((t, sqrt(acc.value())));
    }
    Ok(out)
}

/// One grid point of the `sin ||.||_{H^1}` scan.
#[derive(Debug, Clone, Copy)]
pub struct ScanPoint {
    pub t: f64,
    pub estimate_phi: f64,
    pub se_phi: f64,
    pub estimate_phi_tilde: f64,
    pub se_phi_tilde: f64,
}

/// Monte-Carlo scan of `P_t F` with `F = sin ||.||_{H^1}` from two starting
/// points across a grid of small times. The max-minus-min spread of the
/// first curve is the finite-truncation shadow of the limsup/liminf
/// oscillation at starting points outside `H^1`.
pub fn counterexample_scan(
    params: &HeatModelParams,
    phi: &SpectralState,
    phi_tilde: &SpectralState,
    t_grid: &[f64],
    n_samples: usize,
    stream: RngStream,
) -> Result<Vec<ScanPoint>> {
    if t_grid.is_empty() {
        return Err(CoreError::EmptyGrid("counterexample scan t grid"));
    }
    if n_samples < 2 {
        return Err(CoreError::InvalidParameter(
            "counterexample scan needs n_samples >= 2".into(),
        ));
    }
    let half = params.n_modes;
    let mut out = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let kernel = HeatKernel::new(params, t)?;
        let mut rng = stream.child(ti as u64).rng();
        let mut acc_phi = RunningMoments::new();
        let mut acc_tilde = RunningMoments::new();
        let mut state = SpectralState::zero(half);
        for _ in 0..n_samples {
            kernel.sample_into(phi, &mut rng, &mut state);
            acc_phi.push(crate::math::sin(state.h1_norm()));
            kernel.sample_into(phi_tilde, &mut rng, &mut state);
            acc_tilde.push(crate::math::sin(state.h1_norm()));
        }
        out.push(ScanPoint {
            t,
            estimate_phi: acc_phi.mean(),
            se_phi: acc_phi.std_error(),
            estimate_phi_tilde: acc_tilde.mean(),
            se_phi_tilde: acc_tilde.std_error(),
        });
    }
    Ok(out)
}

/// Spread `max - min` of the `P_t F(phi)` curve of a scan.
pub fn scan_spread(points: &[ScanPoint]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        lo = lo.min(p.estimate_phi);
        hi = hi.max(p.estimate_phi);
    }
    hi - lo
}

/// `phi_k = 1/|k|` for all modes: lies in `L^2_0` but not in `H^1`.
pub fn inverse_mode_state(n_modes: usize) -> SpectralState {
    let mut s = SpectralState::zero(n_modes);
    for k in 1..=n_modes as i32 {
        s.set_mode(k, 1.0 / k as f64).unwrap();
        s.set_mode(-k, 1.0 / k as f64).unwrap();
    }
    s
}
