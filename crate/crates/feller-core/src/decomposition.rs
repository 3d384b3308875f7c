//! Inductive measure-splitting on finite chains.
//!
//! Starting from `delta_{x0}`, repeatedly push forward until the mass on
//! a target subset `B` exceeds `alpha`, split off the normalized
//! restriction to `B`, and continue with the rescaled remainder:
//!
//! `theta_i = mu_{i-1} P^{s_i}`,  `nu_i = theta_i(. ∩ B) / theta_i(B)`,
//! `mu_i = (theta_i - alpha nu_i) / (1 - alpha)`.
//!
//! The stages telescope exactly:
//!
//! `P^{s_1+...+s_k} delta_{x0}
//!    = sum_i alpha (1-alpha)^{i-1} nu_i P^{s_{i+1}+...+s_k}
//!      + (1-alpha)^k mu_k`,
//!
//! and the construction certifies itself by computing the total-variation
//! residual of that identity with exact matrix powers.

use crate::error::{CoreError, Result};
use crate::math::{ceil, ln};
use crate::measure::ProbVector;
use crate::models::chain::FiniteChain;
use crate::stats::CompensatedSum;
use alloc::vec;
use alloc::vec::Vec;

/// Full record of one decomposition run.
#[derive(Debug, Clone)]
pub struct DecompositionTrace {
    pub alpha: f64,
    pub subset: Vec<usize>,
    pub x0: usize,
    /// Entry times `s_1 ... s_k`.
    pub entry_times: Vec<u64>,
    /// Ball-supported components `nu_1 ... nu_k`.
    pub nus: Vec<ProbVector>,
    /// Remainders `mu_1 ... mu_k`.
    pub mus: Vec<ProbVector>,
    /// Total-variation gap of the telescoping identity; filled by
    /// [`verify_telescoping`].
    pub residual_tv: Option<f64>,
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(CoreError::InvalidParameter(alloc::format!(
            "alpha {alpha} must lie in (0, 1)"
        )));
    }
    Ok(())
}

fn validate_subset(chain: &FiniteChain, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(CoreError::InvalidParameter("empty target subset".into()));
    }
    for &i in subset {
        if i >= chain.size() {
            return Err(CoreError::InvalidParameter(alloc::format!(
                "subset state {i} outside 0..{}",
                chain.size()
            )));
        }
    }
    Ok(())
}

/// Smallest `t` in `[1, t_max]` with `(nu P^t)(B) > alpha`, exact.
///
/// Errors with [`CoreError::NoEntryTime`] when no such time exists; that
/// is a statement about the chain, not a crash.
pub fn find_entry_time(
    chain: &FiniteChain,
    nu: &ProbVector,
    subset: &[usize],
    alpha: f64,
    t_max: u64,
) -> Result<u64> {
    validate_alpha(alpha)?;
    validate_subset(chain, subset)?;
    if t_max == 0 {
        return Err(CoreError::InvalidParameter("t_max must be >= 1".into()));
    }
    let mut cur = nu.clone();
    for t in 1..=t_max {
        cur = chain.step_distribution(&cur)?;
        if cur.mass_on(subset) > alpha {
            return Ok(t);
        }
    }
    Err(CoreError::NoEntryTime { stage: 1, t_max })
}

/// Splits `theta` into the normalized restriction to `B` and the rescaled
/// remainder: `alpha * nu + (1 - alpha) * mu = theta` exactly.
pub fn split_measure(
    theta: &ProbVector,
    subset: &[usize],
    alpha: f64,
) -> Result<(ProbVector, ProbVector)> {
    validate_alpha(alpha)?;
    let mass = theta.mass_on(subset);
    if !(mass > alpha) {
        return Err(CoreError::InsufficientMass {
            have: mass,
            need: alpha,
        });
    }
    let n = theta.len();
    let mut in_subset = vec![false; n];
    for &i in subset {
        in_subset[i] = true;
    }
    let mut nu = vec![0.0; n];
    for i in 0..n {
        if in_subset[i] {
            nu[i] = theta.entries()[i] / mass;
        }
    }
    let mut mu = vec![0.0; n];
    for i in 0..n {
        mu[i] = ((theta.entries()[i] - alpha * nu[i]) / (1.0 - alpha)).max(0.0);
    }
    Ok((ProbVector::new(nu)?, ProbVector::new(mu)?))
}

/// Runs `k` stages of the construction from `delta_{x0}`.
pub fn build_decomposition(
    chain: &FiniteChain,
    x0: usize,
    subset: &[usize],
    alpha: f64,
    k: usize,
    t_max: u64,
) -> Result<DecompositionTrace> {
    validate_alpha(alpha)?;
    validate_subset(chain, subset)?;
    if k == 0 {
        return Err(CoreError::InvalidParameter("k must be >= 1".into()));
    }
    if x0 >= chain.size() {
        return Err(CoreError::InvalidParameter(alloc::format!(
            "x0 {x0} outside 0..{}",
            chain.size()
        )));
    }
    let mut entry_times = Vec::with_capacity(k);
    let mut nus = Vec::with_capacity(k);
    let mut mus = Vec::with_capacity(k);
    let mut carrier = ProbVector::delta(chain.size(), x0);
    for stage in 1..=k {
        let s = find_entry_time(chain, &carrier, subset, alpha, t_max).map_err(|e| match e {
            CoreError::NoEntryTime { t_max, .. } => CoreError::NoEntryTime { stage, t_max },
            other => other,
        })?;
        let theta = chain.exact_distribution(&carrier, s)?;
        let (nu, mu) = split_measure(&theta, subset, alpha)?;
        entry_times.push(s);
        nus.push(nu);
        carrier = mu.clone();
        mus.push(mu);
    }
    Ok(DecompositionTrace {
        alpha,
        subset: subset.to_vec(),
        x0,
        entry_times,
        nus,
        mus,
        residual_tv: None,
    })
}

/// Total-variation residual of the telescoping identity, with exact
/// matrix powers on both sides. Stores and returns it.
pub fn verify_telescoping(chain: &FiniteChain, trace: &mut DecompositionTrace) -> Result<f64> {
    let k = trace.entry_times.len();
    if k == 0 || trace.nus.len() != k || trace.mus.len() != k {
        return Err(CoreError::PreconditionFailed("trace is incomplete".into()));
    }
    if trace.x0 >= chain.size() || trace.nus[0].len() != chain.size() {
        return Err(CoreError::PreconditionFailed(
            "trace does not match this chain".into(),
        ));
    }
    let total_time: u64 = trace.entry_times.iter().sum();
    let lhs = chain.exact_distribution(&ProbVector::delta(chain.size(), trace.x0), total_time)?;

    // rhs = sum_i alpha (1-alpha)^{i-1} nu_i P^{s_{i+1}+...+s_k}
    //       + (1-alpha)^k mu_k
    let alpha = trace.alpha;
    let mut rhs = vec![CompensatedSum::new(); chain.size()];
    let mut weight = alpha;
    for (i, nu) in trace.nus.iter().enumerate() {
        let remaining: u64 = trace.entry_times[i + 1..].iter().sum();
        let pushed = chain.exact_distribution(nu, remaining)?;
        for (acc, &p) in rhs.iter_mut().zip(pushed.entries()) {
            acc.add(weight * p);
        }
        weight *= 1.0 - alpha;
    }
    // after the loop weight = alpha (1-alpha)^k; the remainder carries (1-alpha)^k
    let tail_weight = weight / alpha;
    for (acc, &p) in rhs.iter_mut().zip(trace.mus[k - 1].entries()) {
        acc.add(tail_weight * p);
    }

    let mut gap = CompensatedSum::new();
    for (acc, &p) in rhs.iter().zip(lhs.entries()) {
        gap.add((acc.value() - p).abs());
    }
    let residual = 0.5 * gap.value();
    trace.residual_tv = Some(residual);
    Ok(residual)
}

/// Largest usable `alpha` at stage 1: the maximum of the exact mass curve
/// `t -> (delta_{x0} P^t)(B)` over `t <= t_max`. Any `alpha` strictly
/// below this value admits an entry time.
pub fn stage_one_alpha_envelope(
    chain: &FiniteChain,
    x0: usize,
    subset: &[usize],
    t_max: u64,
) -> Result<(u64, f64)> {
    validate_subset(chain, subset)?;
    let mut cur = ProbVector::delta(chain.size(), x0);
    let mut best = (1u64, f64::NEG_INFINITY);
    for t in 1..=t_max {
        cur = chain.step_distribution(&cur)?;
        let mass = cur.mass_on(subset);
        if mass > best.1 {
            best = (t, mass);
        }
    }
    Ok(best)
}

/// Smallest `k >= 1` with `2 (1-alpha)^k sup|f| < eps`, found by search.
pub fn remainder_depth(eps: f64, sup_f: f64, alpha: f64) -> Result<usize> {
    validate_alpha(alpha)?;
    if !(eps > 0.0) || !(sup_f >= 0.0) {
        return Err(CoreError::InvalidParameter(
            "remainder depth needs eps > 0 and sup|f| >= 0".into(),
        ));
    }
    let mut weight = 1.0 - alpha;
    for k in 1..=10_000 {
        if 2.0 * weight * sup_f < eps {
            return Ok(k);
        }
        weight *= 1.0 - alpha;
    }
    Err(CoreError::PreconditionFailed(
        "remainder depth exceeds 10^4".into(),
    ))
}

/// Closed-form counterpart of [`remainder_depth`]:
/// `k = ceil(log(eps / (2 sup|f|)) / log(1 - alpha))`, clamped to >= 1,
/// with one extra stage when the ceiling lands exactly on the boundary.
pub fn remainder_depth_formula(eps: f64, sup_f: f64, alpha: f64) -> Result<usize> {
    validate_alpha(alpha)?;
    if !(eps > 0.0) || !(sup_f >= 0.0) {
        return Err(CoreError::InvalidParameter(
            "remainder depth needs eps > 0 and sup|f| >= 0".into(),
        ));
    }
    if 2.0 * sup_f < eps {
        return Ok(1);
    }
    let ratio = eps / (2.0 * sup_f);
    let raw = ln(ratio) / ln(1.0 - alpha);
    let mut k = ceil(raw) as usize;
    if 2.0 * crate::math::pow(1.0 - alpha, k as f64) * sup_f >= eps {
        k += 1;
    }
    Ok(k.max(1))
}
