//! Estimation of the moduli behind each regularity notion.
//!
//! Every notion compares dual values at probes `x` near a center `z`:
//!
//! * e-property: `sup_{t in grid} |P_t f(x) - P_t f(z)|`, all `t`;
//! * eventual e-property: the same sup restricted to `t >= t_min`, with
//!   the threshold `t_min` shared by all probes of a radius;
//! * eventual continuity: each probe may pick its own tail window before
//!   taking the sup (the inner `min` over windows realizes the
//!   per-probe threshold).
//!
//! Duals are exact where the model allows (finite chains via matrix
//! powers, deterministic flows via orbits) and Monte-Carlo with common
//! random numbers otherwise: probes and center share the identical noise
//! per (time, sample index), so their difference obeys the pathwise
//! contraction bounds.

use crate::error::{CoreError, Result};
use crate::measure::EmpiricalMeasure;
use crate::models::heat::HeatKernel;
use crate::models::slide::slide_flow;
use crate::observable::TestFunction;
use crate::rng::RngStream;
use crate::semigroup::{SemigroupModel, TimeKind};
use crate::space::{MetricPoint, RotationPoint, SpectralState};
use crate::stats::RunningMoments;
use crate::wasserstein;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

const PROBE_STREAM: u64 = 0x5052;
const EVAL_STREAM: u64 = 0x4556;

/// How probes are generated around the center, per radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeRule {
    /// Center plus random perturbations supported on modes `|k| <=
    /// max_mode`, L2 norm exactly the radius.
    HeatLowMode { max_mode: usize },
    /// Every tail point within the radius plus an interval mesh. The
    /// adversarial directions (the tails) are covered deterministically.
    RotationReachable,
    /// Deterministic mesh of `[z - r, z + r] ∩ [0, 1]`.
    SlideMesh,
    /// All other states once the discrete-metric ball reaches them.
    ChainBall,
}

/// Center, radii and probe rule of a modulus estimation.
#[derive(Debug, Clone)]
pub struct ProbePlan {
    pub center: MetricPoint,
    /// Strictly decreasing radii.
    pub radii: Vec<f64>,
    pub probes_per_radius: usize,
    pub rule: ProbeRule,
}

impl ProbePlan {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() {
            return Err(CoreError::EmptyGrid("probe plan radii"));
        }
        for w in self.radii.windows(2) {
            if !(w[1] < w[0]) {
                return Err(CoreError::InvalidParameter(
                    "radii must be strictly decreasing".into(),
                ));
            }
        }
        if !(self.radii[self.radii.len() - 1] > 0.0) {
            return Err(CoreError::InvalidParameter("radii must be > 0".into()));
        }
        Ok(())
    }
}

/// Probes within `radius` of the plan's center. Every returned point
/// satisfies `distance(x, center) <= radius + 1e-12`.
pub fn generate_probes(
    model: &SemigroupModel,
    plan: &ProbePlan,
    radius: f64,
    stream: RngStream,
) -> Result<Vec<MetricPoint>> {
    model.validate_point(&plan.center)?;
    let mut probes = Vec::new();
    match (plan.rule, model) {
        (ProbeRule::HeatLowMode { max_mode }, SemigroupModel::Heat(params)) => {
            let center = plan.center.as_spectral()?;
            let span = max_mode.min(params.n_modes()).max(1);
            for i in 0..plan.probes_per_radius {
                let mut rng = stream.child(i as u64).rng();
                let mut dir = SpectralState::zero(params.n_modes());
                for k in 1..=span as i32 {
                    dir.set_mode(k, rng.sample(StandardNormal))?;
                    dir.set_mode(-k, rng.sample(StandardNormal))?;
                }
                let norm = dir.l2_norm();
                if norm == 0.0 {
                    continue;
                }
                let scale = radius / norm;
                let mut probe = center.clone();
                for (dst, &d) in probe.coeffs_mut().iter_mut().zip(dir.coeffs()) {
                    *dst += scale * d;
                }
                probes.push(MetricPoint::Spectral(probe));
            }
        }
        (ProbeRule::RotationReachable, SemigroupModel::RotationTail(params)) => {
            let ze = plan.center.as_rotation()?.embed();
            for n in 1..=params.n_max() {
                if (1.0 / n as f64 - ze).abs() <= radius {
                    probes.push(MetricPoint::IntervalOrTail(RotationPoint::Tail(n)));
                }
            }
            let lo = (ze - radius).max(-1.0);
            let hi = (ze + radius).min(0.0);
            if lo <= hi && plan.probes_per_radius > 0 {
                let m = plan.probes_per_radius;
                for i in 0..m {
                    let u = if m == 1 {
                        lo
                    } else {
                        lo + (hi - lo) * i as f64 / (m - 1) as f64
                    };
                    probes.push(MetricPoint::IntervalOrTail(RotationPoint::Interval(u)));
                }
            }
        }
        (ProbeRule::SlideMesh, SemigroupModel::Slide(_)) => {
            let z = plan.center.as_unit()?;
            let lo = (z - radius).max(0.0);
            let hi = (z + radius).min(1.0);
            let m = plan.probes_per_radius.max(2);
            for i in 0..m {
                let x = lo + (hi - lo) * i as f64 / (m - 1) as f64;
                let p = MetricPoint::Unit(x);
                if model.distance(&p, &plan.center)? <= radius {
                    probes.push(p);
                }
            }
        }
        (ProbeRule::ChainBall, SemigroupModel::Chain(c)) => {
            if radius >= 1.0 {
                let z = plan.center.as_chain()?;
                probes.extend((0..c.size()).filter(|i| *i != z).map(MetricPoint::Chain));
            }
        }
        (rule, model) => {
            return Err(CoreError::InvalidParameter(format!(
                "probe rule {rule:?} does not apply to {}",
                model.label()
            )))
        }
    }
    for p in &probes {
        let d = model.distance(p, &plan.center)?;
        if d > radius + 1e-12 {
            return Err(CoreError::PreconditionFailed(format!(
                "generated probe at distance {d} > radius {radius}"
            )));
        }
    }
    Ok(probes)
}

/// Supremum of the dual gap over one grid segment.
#[derive(Debug, Clone, Copy)]
struct SegmentSup {
    gap: f64,
    std_error: f64,
    t: f64,
    t_index: usize,
}

/// One point of a per-radius gap curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPoint {
    pub t: f64,
    pub gap: f64,
    pub std_error: f64,
}

struct SegmentReducer {
    segments: Vec<(f64, f64)>,
    best: Vec<Vec<Option<SegmentSup>>>,
    /// probe id -> indices of the curve groups it belongs to
    group_of: Vec<Vec<usize>>,
    /// per group, per grid index: max gap over the group's probes
    curves: Vec<Vec<GapPoint>>,
}

impl SegmentReducer {
    fn new(n_probes: usize, segments: &[(f64, f64)], groups: &[Vec<usize>], t_grid: &[f64]) -> Self {
        let mut group_of = vec![Vec::new(); n_probes];
        for (g, members) in groups.iter().enumerate() {
            for &p in members {
                group_of[p].push(g);
            }
        }
        let empty_curve: Vec<GapPoint> = t_grid
            .iter()
            .map(|&t| GapPoint {
                t,
                gap: 0.0,
                std_error: 0.0,
            })
            .collect();
        Self {
            segments: segments.to_vec(),
            best: vec![vec![None; segments.len()]; n_probes],
            group_of,
            curves: vec![empty_curve; groups.len()],
        }
    }

    #[inline]
    fn update(&mut self, probe: usize, t_index: usize, t: f64, gap: f64, std_error: f64) {
        for (s, &(lo, hi)) in self.segments.iter().enumerate() {
            if t >= lo && t <= hi {
                let slot = &mut self.best[probe][s];
                if slot.map_or(true, |b| gap > b.gap) {
                    *slot = Some(SegmentSup {
                        gap,
                        std_error,
                        t,
                        t_index,
                    });
                }
            }
        }
        for &g in &self.group_of[probe] {
            let point = &mut self.curves[g][t_index];
            if gap > point.gap {
                point.gap = gap;
                point.std_error = std_error;
            }
        }
    }
}

fn validate_grid(model: &SemigroupModel, t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(CoreError::EmptyGrid("time grid"));
    }
    for w in t_grid.windows(2) {
        if !(w[0] < w[1]) {
            return Err(CoreError::InvalidParameter(
                "time grid must be strictly increasing".into(),
            ));
        }
    }
    for &t in t_grid {
        model.validate_time(t)?;
        if model.time_kind() == TimeKind::Discrete && t < 1.0 {
            return Err(CoreError::InvalidTime {
                t,
                reason: "discrete-time grids start at t = 1",
            });
        }
    }
    Ok(())
}

/// Core engine: per probe and per segment, the supremum over grid times
/// of the estimated `|P_t f(x) - P_t f(z)|`; additionally, per curve
/// group, the per-time max over the group's probes.
#[allow(clippy::too_many_arguments)]
fn gap_segment_sups(
    model: &SemigroupModel,
    f: &TestFunction,
    center: &MetricPoint,
    probes: &[MetricPoint],
    t_grid: &[f64],
    segments: &[(f64, f64)],
    groups: &[Vec<usize>],
    n_samples: usize,
    stream: RngStream,
) -> Result<(Vec<Vec<Option<SegmentSup>>>, Vec<Vec<GapPoint>>)> {
    validate_grid(model, t_grid)?;
    model.validate_point(center)?;
    for p in probes {
        model.validate_point(p)?;
    }
    let mut red = SegmentReducer::new(probes.len(), segments, groups, t_grid);
    match model {
        SemigroupModel::Heat(params) => {
            if n_samples < 2 {
                return Err(CoreError::InvalidParameter(
                    "heat moduli need n_samples >= 2".into(),
                ));
            }
            let phi_c = center.as_spectral()?;
            let dim = 2 * params.n_modes();
            let probe_states: Vec<&SpectralState> = probes
                .iter()
                .map(|p| p.as_spectral())
                .collect::<Result<_>>()?;
            let mut noise = vec![0.0f64; dim];
            let mut holder = MetricPoint::Spectral(SpectralState::zero(params.n_modes()));
            for (ti, &t) in t_grid.iter().enumerate() {
                let kernel = HeatKernel::new(params, t)?;
                let mut moments = vec![RunningMoments::new(); probes.len()];
                let t_stream = stream.child(ti as u64);
                for j in 0..n_samples {
                    let mut rng = t_stream.child(j as u64).rng();
                    for z in noise.iter_mut() {
                        *z = rng.sample(StandardNormal);
                    }
                    let fc = {
                        let out = match &mut holder {
                            MetricPoint::Spectral(s) => s,
                            _ => unreachable!(),
                        };
                        kernel.apply_with_noise(phi_c, &noise, out);
                        f.eval(&holder)
                    };
                    for (pi, ps) in probe_states.iter().enumerate() {
                        let out = match &mut holder {
                            MetricPoint::Spectral(s) => s,
                            _ => unreachable!(),
                        };
                        kernel.apply_with_noise(ps, &noise, out);
                        moments[pi].push(f.eval(&holder) - fc);
                    }
                }
                for (pi, m) in moments.iter().enumerate() {
                    red.update(pi, ti, t, m.mean().abs(), m.std_error());
                }
            }
        }
        SemigroupModel::Chain(chain) => {
            let zi = center.as_chain()?;
            let probe_idx: Vec<usize> = probes
                .iter()
                .map(|p| p.as_chain())
                .collect::<Result<_>>()?;
            let f_vec: Vec<f64> = (0..chain.size())
                .map(|i| f.eval(&MetricPoint::Chain(i)))
                .collect();
            let t_max = t_grid[t_grid.len() - 1] as u64;
            let mut dual = f_vec;
            let mut gi = 0usize;
            for t in 1..=t_max {
                dual = chain.step_dual(&dual)?;
                while gi < t_grid.len() && t_grid[gi] as u64 == t {
                    for (pi, &x) in probe_idx.iter().enumerate() {
                        red.update(pi, gi, t_grid[gi], (dual[x] - dual[zi]).abs(), 0.0);
                    }
                    gi += 1;
                }
            }
        }
        SemigroupModel::RotationTail(params) => {
            let mut cur_c = center.as_rotation()?;
            let mut cur_p: Vec<RotationPoint> = probes
                .iter()
                .map(|p| p.as_rotation())
                .collect::<Result<_>>()?;
            let t_max = t_grid[t_grid.len() - 1] as u64;
            let mut gi = 0usize;
            for t in 1..=t_max {
                cur_c = params.step(cur_c);
                for p in cur_p.iter_mut() {
                    *p = params.step(*p);
                }
                while gi < t_grid.len() && t_grid[gi] as u64 == t {
                    let fc = f.eval(&MetricPoint::IntervalOrTail(cur_c));
                    for (pi, p) in cur_p.iter().enumerate() {
                        let fp = f.eval(&MetricPoint::IntervalOrTail(*p));
                        red.update(pi, gi, t_grid[gi], (fp - fc).abs(), 0.0);
                    }
                    gi += 1;
                }
            }
        }
        SemigroupModel::Slide(_) => {
            let z = center.as_unit()?;
            let xs: Vec<f64> = probes.iter().map(|p| p.as_unit()).collect::<Result<_>>()?;
            for (ti, &t) in t_grid.iter().enumerate() {
                let fc = f.eval(&MetricPoint::Unit(slide_flow(z, t)?));
                for (pi, &x) in xs.iter().enumerate() {
                    let fp = f.eval(&MetricPoint::Unit(slide_flow(x, t)?));
                    red.update(pi, ti, t, (fp - fc).abs(), 0.0);
                }
            }
        }
    }
    Ok((red.best, red.curves))
}

/// Which modulus a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulusKind {
    E,
    EventualE,
    EventualContinuity,
}

/// The probe and time attaining a reported modulus.
#[derive(Debug, Clone)]
pub struct Witness {
    pub probe: MetricPoint,
    pub t: f64,
    pub t_index: usize,
    pub window: Option<(f64, f64)>,
}

/// One radius row of a modulus report.
#[derive(Debug, Clone)]
pub struct ModulusCell {
    pub radius: f64,
    pub modulus: f64,
    pub std_error: f64,
    /// Chosen shared threshold (eventual e-property only).
    pub t_min: Option<f64>,
    pub witness: Option<Witness>,
}

/// Modulus estimates per radius, plus the metadata needed to reproduce
/// every number (grid, sample count, stream).
#[derive(Debug, Clone)]
pub struct ModulusReport {
    pub kind: ModulusKind,
    pub cells: Vec<ModulusCell>,
    /// Per radius (same order as `cells`), the gap curve over the grid:
    /// max over that radius' probes at each time.
    pub curves: Vec<Vec<GapPoint>>,
    pub t_grid: Vec<f64>,
    pub n_samples: usize,
    pub eval_stream: RngStream,
}

struct FlatProbes {
    unique: Vec<MetricPoint>,
    per_radius: Vec<Vec<usize>>,
}

fn flatten_probes(
    model: &SemigroupModel,
    plan: &ProbePlan,
    stream: RngStream,
) -> Result<FlatProbes> {
    let mut unique: Vec<MetricPoint> = Vec::new();
    let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut per_radius = Vec::with_capacity(plan.radii.len());
    for (ri, &r) in plan.radii.iter().enumerate() {
        let probes = generate_probes(model, plan, r, stream.child(ri as u64))?;
        let mut ids = Vec::with_capacity(probes.len());
        for p in probes {
            let key = point_key(&p);
            let id = *index.entry(key).or_insert_with(|| {
                unique.push(p.clone());
                unique.len() - 1
            });
            ids.push(id);
        }
        ids.sort_unstable();
        ids.dedup();
        per_radius.push(ids);
    }
    Ok(FlatProbes { unique, per_radius })
}

fn point_key(p: &MetricPoint) -> Vec<u64> {
    match p {
        MetricPoint::Spectral(s) => s.coeffs().iter().map(|c| c.to_bits()).collect(),
        MetricPoint::IntervalOrTail(RotationPoint::Interval(u)) => vec![0, u.to_bits()],
        MetricPoint::IntervalOrTail(RotationPoint::Tail(n)) => vec![1, *n as u64],
        MetricPoint::Unit(x) => vec![x.to_bits()],
        MetricPoint::Chain(i) => vec![*i as u64],
    }
}

/// e-property modulus: per radius, the largest dual gap over all probes
/// and all grid times.
pub fn e_modulus(
    model: &SemigroupModel,
    f: &TestFunction,
    plan: &ProbePlan,
    t_grid: &[f64],
    n_samples: usize,
    stream: RngStream,
) -> Result<ModulusReport> {
    plan.validate()?;
    validate_grid(model, t_grid)?;
    let flat = flatten_probes(model, plan, stream.child(PROBE_STREAM))?;
    let eval_stream = stream.child(EVAL_STREAM);
    let whole = [(t_grid[0], t_grid[t_grid.len() - 1])];
    let (sups, curves) = gap_segment_sups(
        model,
        f,
        &plan.center,
        &flat.unique,
        t_grid,
        &whole,
        &flat.per_radius,
        n_samples,
        eval_stream,
    )?;
    let cells = plan
        .radii
        .iter()
        .zip(&flat.per_radius)
        .map(|(&radius, ids)| {
            let mut best: Option<(usize, SegmentSup)> = None;
            for &id in ids {
                if let Some(s) = sups[id][0] {
                    if best.map_or(true, |(_, b)| s.gap > b.gap) {
                        best = Some((id, s));
                    }
                }
            }
            match best {
                Some((id, s)) => ModulusCell {
                    radius,
                    modulus: s.gap,
                    std_error: s.std_error,
                    t_min: None,
                    witness: Some(Witness {
                        probe: flat.unique[id].clone(),
                        t: s.t,
                        t_index: s.t_index,
                        window: None,
                    }),
                },
                None => ModulusCell {
                    radius,
                    modulus: 0.0,
                    std_error: 0.0,
                    t_min: None,
                    witness: None,
                },
            }
        })
        .collect();
    Ok(ModulusReport {
        kind: ModulusKind::E,
        cells,
        curves,
        t_grid: t_grid.to_vec(),
        n_samples,
        eval_stream,
    })
}

/// Eventual e-property modulus: the sup runs over `t >= t_min` only; the
/// candidate `t_min` list is scanned and the best (smallest) modulus per
/// radius is reported together with the chosen threshold.
pub fn eventual_e_modulus(
    model: &SemigroupModel,
    f: &TestFunction,
    plan: &ProbePlan,
    t_mins: &[f64],
    t_grid: &[f64],
    n_samples: usize,
    stream: RngStream,
) -> Result<ModulusReport> {
    plan.validate()?;
    validate_grid(model, t_grid)?;
    if t_mins.is_empty() {
        return Err(CoreError::EmptyGrid("t_min candidates"));
    }
    let t_max = t_grid[t_grid.len() - 1];
    for &tm in t_mins {
        if !t_grid.iter().any(|&t| t >= tm) {
            return Err(CoreError::InvalidParameter(format!(
                "no grid point at or above t_min {tm}"
            )));
        }
    }
    let flat = flatten_probes(model, plan, stream.child(PROBE_STREAM))?;
    let eval_stream = stream.child(EVAL_STREAM);
    let segments: Vec<(f64, f64)> = t_mins.iter().map(|&tm| (tm, t_max)).collect();
    let (sups, curves) = gap_segment_sups(
        model,
        f,
        &plan.center,
        &flat.unique,
        t_grid,
        &segments,
        &flat.per_radius,
        n_samples,
        eval_stream,
    )?;
    let cells = plan
        .radii
        .iter()
        .zip(&flat.per_radius)
        .map(|(&radius, ids)| {
            // per t_min candidate: max over probes; then min over candidates
            let mut best_cell: Option<(f64, usize, SegmentSup)> = None;
            for (si, &tm) in t_mins.iter().enumerate() {
                let mut worst: Option<(usize, SegmentSup)> = None;
                for &id in ids {
                    if let Some(s) = sups[id][si] {
                        if worst.map_or(true, |(_, w)| s.gap > w.gap) {
                            worst = Some((id, s));
                        }
                    }
                }
                if let Some((id, w)) = worst {
                    if best_cell.map_or(true, |(_, _, b)| w.gap < b.gap) {
                        best_cell = Some((tm, id, w));
                    }
                }
            }
            match best_cell {
                Some((tm, id, s)) => ModulusCell {
                    radius,
                    modulus: s.gap,
                    std_error: s.std_error,
                    t_min: Some(tm),
                    witness: Some(Witness {
                        probe: flat.unique[id].clone(),
                        t: s.t,
                        t_index: s.t_index,
                        window: None,
                    }),
                },
                None => ModulusCell {
                    radius,
                    modulus: 0.0,
                    std_error: 0.0,
                    t_min: t_mins.first().copied(),
                    witness: None,
                },
            }
        })
        .collect();
    Ok(ModulusReport {
        kind: ModulusKind::EventualE,
        cells,
        curves,
        t_grid: t_grid.to_vec(),
        n_samples,
        eval_stream,
    })
}

/// Eventual-continuity modulus: per radius, the max over probes of the
/// *per-probe* minimum over tail windows of the in-window sup.
pub fn eventual_continuity_modulus(
    model: &SemigroupModel,
    f: &TestFunction,
    plan: &ProbePlan,
    tail_windows: &[(f64, f64)],
    t_grid: &[f64],
    n_samples: usize,
    stream: RngStream,
) -> Result<ModulusReport> {
    plan.validate()?;
    validate_grid(model, t_grid)?;
    if tail_windows.is_empty() {
        return Err(CoreError::EmptyGrid("tail windows"));
    }
    for &(lo, hi) in tail_windows {
        if !(lo <= hi) {
            return Err(CoreError::InvalidParameter(format!(
                "window ({lo}, {hi}) is empty"
            )));
        }
        if !t_grid.iter().any(|&t| t >= lo && t <= hi) {
            return Err(CoreError::InvalidParameter(format!(
                "no grid point inside window ({lo}, {hi})"
            )));
        }
    }
    let flat = flatten_probes(model, plan, stream.child(PROBE_STREAM))?;
    let eval_stream = stream.child(EVAL_STREAM);
    let (sups, curves) = gap_segment_sups(
        model,
        f,
        &plan.center,
        &flat.unique,
        t_grid,
        tail_windows,
        &flat.per_radius,
        n_samples,
        eval_stream,
    )?;
    let cells = plan
        .radii
        .iter()
        .zip(&flat.per_radius)
        .map(|(&radius, ids)| {
            let mut worst: Option<(usize, usize, SegmentSup)> = None; // (probe, window, sup)
            for &id in ids {
                // per-probe best window
                let mut best: Option<(usize, SegmentSup)> = None;
                for (wi, sup) in sups[id].iter().enumerate() {
                    if let Some(s) = *sup {
                        if best.map_or(true, |(_, b)| s.gap < b.gap) {
                            best = Some((wi, s));
                        }
                    }
                }
                if let Some((wi, s)) = best {
                    if worst.map_or(true, |(_, _, w)| s.gap > w.gap) {
                        worst = Some((id, wi, s));
                    }
                }
            }
            match worst {
                Some((id, wi, s)) => ModulusCell {
                    radius,
                    modulus: s.gap,
                    std_error: s.std_error,
                    t_min: None,
                    witness: Some(Witness {
                        probe: flat.unique[id].clone(),
                        t: s.t,
                        t_index: s.t_index,
                        window: Some(tail_windows[wi]),
                    }),
                },
                None => ModulusCell {
                    radius,
                    modulus: 0.0,
                    std_error: 0.0,
                    t_min: None,
                    witness: None,
                },
            }
        })
        .collect();
    Ok(ModulusReport {
        kind: ModulusKind::EventualContinuity,
        cells,
        curves,
        t_grid: t_grid.to_vec(),
        n_samples,
        eval_stream,
    })
}

/// Recomputes the gap behind a cell's witness with the identical stream
/// derivation. Bit-identical for Monte-Carlo models, exact for the rest.
pub fn reevaluate_witness(
    model: &SemigroupModel,
    f: &TestFunction,
    center: &MetricPoint,
    report: &ModulusReport,
    cell: &ModulusCell,
) -> Result<(f64, f64)> {
    let witness = cell.witness.as_ref().ok_or_else(|| {
        CoreError::PreconditionFailed("cell carries no witness".into())
    })?;
    let t = witness.t;
    match model {
        SemigroupModel::Heat(params) => {
            let kernel = HeatKernel::new(params, t)?;
            let phi_c = center.as_spectral()?;
            let phi_p = witness.probe.as_spectral()?;
            let dim = 2 * params.n_modes();
            let mut noise = vec![0.0f64; dim];
            let mut holder = MetricPoint::Spectral(SpectralState::zero(params.n_modes()));
            let mut moments = RunningMoments::new();
            let t_stream = report.eval_stream.child(witness.t_index as u64);
            for j in 0..report.n_samples {
                let mut rng = t_stream.child(j as u64).rng();
                for z in noise.iter_mut() {
                    *z = rng.sample(StandardNormal);
                }
                let out = match &mut holder {
                    MetricPoint::Spectral(s) => s,
                    _ => unreachable!(),
                };
                kernel.apply_with_noise(phi_c, &noise, out);
                let fc = f.eval(&holder);
                let out = match &mut holder {
                    MetricPoint::Spectral(s) => s,
                    _ => unreachable!(),
                };
                kernel.apply_with_noise(phi_p, &noise, out);
                moments.push(f.eval(&holder) - fc);
            }
            Ok((moments.mean().abs(), moments.std_error()))
        }
        SemigroupModel::Chain(chain) => {
            let f_vec: Vec<f64> = (0..chain.size())
                .map(|i| f.eval(&MetricPoint::Chain(i)))
                .collect();
            let dual = chain.exact_dual(&f_vec, t as u64)?;
            Ok(((dual[witness.probe.as_chain()?] - dual[center.as_chain()?]).abs(), 0.0))
        }
        _ => {
            let stream = RngStream::new(0);
            let yc = model.sample_transition(center, t, stream)?;
            let yp = model.sample_transition(&witness.probe, t, stream)?;
            Ok(((f.eval(&yp) - f.eval(&yc)).abs(), 0.0))
        }
    }
}

/// Classification outcome for one report against a threshold.
#[derive(Debug, Clone, PartialEq)]
pub enum VerdictKind {
    ConsistentWithHolding,
    ViolatedWithWitness,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct PropertyVerdict {
    pub kind: VerdictKind,
    pub threshold: f64,
    /// Index of the violating cell, when violated.
    pub violating_cell: Option<usize>,
}

/// Decision rule with 3-sigma guard bands:
///
/// * violated when some radius shows `modulus - 3 se > threshold` and the
///   cell carries a witness;
/// * consistent when the smallest radius shows `modulus + 3 se <
///   threshold` and moduli are non-increasing in the radius;
/// * inconclusive otherwise.
pub fn classify(report: &ModulusReport, threshold: f64) -> Result<PropertyVerdict> {
    if !(threshold > 0.0) {
        return Err(CoreError::InvalidParameter(
            "classification threshold must be > 0".into(),
        ));
    }
    for (i, cell) in report.cells.iter().enumerate() {
        if cell.witness.is_some() && cell.modulus - 3.0 * cell.std_error > threshold {
            return Ok(PropertyVerdict {
                kind: VerdictKind::ViolatedWithWitness,
                threshold,
                violating_cell: Some(i),
            });
        }
    }
    let last = report
        .cells
        .last()
        .ok_or(CoreError::EmptyGrid("modulus cells"))?;
    let small_ok = last.modulus + 3.0 * last.std_error < threshold;
    let mut monotone = true;
    for w in report.cells.windows(2) {
        let slack = 3.0 * (w[0].std_error + w[1].std_error) + 1e-12;
        if w[1].modulus > w[0].modulus + slack {
            monotone = false;
        }
    }
    if small_ok && monotone {
        Ok(PropertyVerdict {
            kind: VerdictKind::ConsistentWithHolding,
            threshold,
            violating_cell: None,
        })
    } else {
        Ok(PropertyVerdict {
            kind: VerdictKind::Inconclusive,
            threshold,
            violating_cell: None,
        })
    }
}

/// One point of a strong-continuity deficit curve.
#[derive(Debug, Clone, Copy)]
pub struct DeficitPoint {
    pub t: f64,
    pub deficit: f64,
    pub std_error: f64,
}

/// `sup_x |P_t f(x) - f(x)|` over the probe states, for small `t`.
/// Strong continuity is consistent when the curve decays to 0.
pub fn strong_continuity_deficit(
    model: &SemigroupModel,
    f: &TestFunction,
    t_grid: &[f64],
    probe_states: &[MetricPoint],
    n_samples: usize,
    stream: RngStream,
) -> Result<Vec<DeficitPoint>> {
    if model.time_kind() != TimeKind::Continuous {
        return Err(CoreError::UnsupportedOperation(
            "strong continuity is a continuous-time notion",
        ));
    }
    if t_grid.is_empty() {
        return Err(CoreError::EmptyGrid("deficit t grid"));
    }
    if probe_states.is_empty() {
        return Err(CoreError::EmptyGrid("deficit probe states"));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let mut worst = DeficitPoint {
            t,
            deficit: f64::NEG_INFINITY,
            std_error: 0.0,
        };
        for (xi, x) in probe_states.iter().enumerate() {
            let (est, se) = model.estimate_dual(
                f,
                x,
                t,
                n_samples,
                stream.child(ti as u64).child(xi as u64),
            )?;
            let gap = (est - f.eval(x)).abs();
            if gap > worst.deficit {
                worst.deficit = gap;
                worst.std_error = se;
            }
        }
        out.push(worst);
    }
    Ok(out)
}

/// Estimated in-window sup of `|P_t f(x) - P_t f(y)|`.
#[derive(Debug, Clone, Copy)]
pub struct WindowGap {
    pub window: (f64, f64),
    pub gap: f64,
    pub std_error: f64,
    pub t_at: f64,
}

/// Complete-mixing diagnostic: gap curves over tail windows for one pair
/// of starting points, common random numbers on stochastic models.
pub fn mixing_gap(
    model: &SemigroupModel,
    f: &TestFunction,
    x: &MetricPoint,
    y: &MetricPoint,
    tail_windows: &[(f64, f64)],
    t_grid: &[f64],
    n_samples: usize,
    stream: RngStream,
) -> Result<Vec<WindowGap>> {
    if tail_windows.is_empty() {
        return Err(CoreError::EmptyGrid("mixing windows"));
    }
    let probes = [y.clone()];
    let (sups, _) = gap_segment_sups(
        model,
        f,
        x,
        &probes,
        t_grid,
        tail_windows,
        &[],
        n_samples,
        stream,
    )?;
    Ok(tail_windows
        .iter()
        .enumerate()
        .map(|(wi, &window)| match sups[0][wi] {
            Some(s) => WindowGap {
                window,
                gap: s.gap,
                std_error: s.std_error,
                t_at: s.t,
            },
            None => WindowGap {
                window,
                gap: 0.0,
                std_error: 0.0,
                t_at: window.0,
            },
        })
        .collect())
}

/// How stability curves measure the distance between the two clouds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum W1Mode {
    /// Full model metric (subject to the exact-matching cap).
    ModelMetric,
    /// Sorted-sample W1 of one spectral mode's coefficients.
    ProjectMode(i32),
}

/// Wasserstein-1 between independently sampled clouds of `P_t delta_x`
/// and `P_t delta_y`, per grid time. Asymptotic stability is consistent
/// when the curve decays for every pair of starts.
pub fn stability_gap(
    model: &SemigroupModel,
    x: &MetricPoint,
    y: &MetricPoint,
    t_grid: &[f64],
    n_samples: usize,
    mode: W1Mode,
    stream: RngStream,
) -> Result<Vec<(f64, f64)>> {
    validate_grid(model, t_grid)?;
    let n = if model.is_deterministic() { 1 } else { n_samples };
    if n == 0 {
        return Err(CoreError::InvalidParameter(
            "stability needs n_samples >= 1".into(),
        ));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let sx = stream.child(ti as u64).child(0);
        let sy = stream.child(ti as u64).child(1);
        let cloud = |start: &MetricPoint, s: RngStream| -> Result<EmpiricalMeasure> {
            let pts: Result<Vec<MetricPoint>> = (0..n)
                .map(|j| model.sample_transition(start, t, s.child(j as u64)))
                .collect();
            EmpiricalMeasure::from_points(pts?)
        };
        let cx = cloud(x, sx)?;
        let cy = cloud(y, sy)?;
        let w1 = match mode {
            W1Mode::ModelMetric => wasserstein::wasserstein1(&cx, &cy, model)?,
            W1Mode::ProjectMode(k) => {
                let px: Vec<f64> = cx
                    .points()
                    .map(|p| p.as_spectral().and_then(|s| s.mode(k)))
                    .collect::<Result<_>>()?;
                let py: Vec<f64> = cy
                    .points()
                    .map(|p| p.as_spectral().and_then(|s| s.mode(k)))
                    .collect::<Result<_>>()?;
                wasserstein::sorted_pairs(&px, &py)?
            }
        };
        out.push((t, w1));
    }
    Ok(out)
}
