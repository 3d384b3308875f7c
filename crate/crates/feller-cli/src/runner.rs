//! Experiment dispatch.
//!
//! Exit-code taxonomy: schema violations (2) are misconfigurations;
//! computation precondition failures (3) are scientific results (for
//! example a missing entry time); I/O problems are 4.

use crate::config::{ConfigFile, DecomposeConfig, EstimationConfig, GridsConfig, SubExperiment};
use crate::report::{
    ExperimentResult, ModulusSummary, ReportBundle, ReportRow, ScalarSummary, TraceSummary,
    VerdictSummary,
};
use feller_core::decomposition;
use feller_core::ergodic::{self, StationarySpec};
use feller_core::regularity::{
    self, ModulusKind, ModulusReport, ProbePlan, ProbeRule, VerdictKind, W1Mode,
};
use feller_core::rng::RngStream;
use feller_core::semigroup::TimeKind;
use feller_core::space::MetricPoint;
use feller_core::{CoreError, SemigroupModel, TestFunction};
use rayon::prelude::*;

#[derive(Debug)]
pub enum RunError {
    /// Invalid configuration; exit code 2.
    Schema(String),
    /// A computation precondition failed; exit code 3.
    Computation(CoreError),
    /// Filesystem trouble; exit code 4.
    Io(std::io::Error),
}

impl core::fmt::Display for RunError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RunError::Schema(msg) => write!(f, "schema error: {msg}"),
            RunError::Computation(e) => write!(f, "computation error: {e}"),
            RunError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema(_) => 2,
            RunError::Computation(_) => 3,
            RunError::Io(_) => 4,
        }
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Computation(e)
    }
}

type RunResult<T> = Result<T, RunError>;

fn schema<T>(msg: impl Into<String>) -> RunResult<T> {
    Err(RunError::Schema(msg.into()))
}

/// One experiment's ingredients after schema validation.
struct Resolved<'c> {
    id: String,
    kind: String,
    model: SemigroupModel,
    observable: Option<&'c crate::config::ObservableConfig>,
    points: Option<&'c crate::config::PointsConfig>,
    grids: Option<&'c GridsConfig>,
    estimation: Option<&'c EstimationConfig>,
    decompose: Option<&'c DecomposeConfig>,
}

impl<'c> Resolved<'c> {
    fn observable(&self) -> RunResult<TestFunction> {
        match self.observable {
            Some(o) => o.build(&self.model).or_else(schema),
            None => schema("experiment needs an [observable] section"),
        }
    }

    fn grids(&self) -> RunResult<&GridsConfig> {
        self.grids
            .ok_or_else(|| RunError::Schema("experiment needs a [grids] section".into()))
    }

    fn t_grid(&self) -> RunResult<Vec<f64>> {
        self.grids()?.t_grid().or_else(schema)
    }

    fn point(&self, which: &str) -> RunResult<MetricPoint> {
        let points = self
            .points
            .ok_or_else(|| RunError::Schema("experiment needs a [points] section".into()))?;
        let spec = match which {
            "x" => points.x.as_ref(),
            "y" => points.y.as_ref(),
            "center" => points.center.as_ref(),
            _ => None,
        };
        match spec {
            Some(p) => p.build(&self.model).or_else(schema),
            None => schema(format!("experiment needs points.{which}")),
        }
    }

    fn n_samples(&self) -> usize {
        self.estimation.and_then(|e| e.n_samples).unwrap_or(1000)
    }

    fn threshold(&self) -> f64 {
        self.estimation.and_then(|e| e.threshold).unwrap_or(0.05)
    }

    fn probe_rule(&self) -> ProbeRule {
        let max_mode = self
            .estimation
            .and_then(|e| e.max_probe_mode)
            .unwrap_or(8);
        match self.model {
            SemigroupModel::Heat(_) => ProbeRule::HeatLowMode { max_mode },
            SemigroupModel::RotationTail(_) => ProbeRule::RotationReachable,
            SemigroupModel::Slide(_) => ProbeRule::SlideMesh,
            SemigroupModel::Chain(_) => ProbeRule::ChainBall,
        }
    }

    fn plan(&self) -> RunResult<ProbePlan> {
        let radii = self
            .grids()?
            .radii
            .clone()
            .ok_or_else(|| RunError::Schema("modulus experiments need grids.radii".into()))?;
        Ok(ProbePlan {
            center: self.point("center")?,
            radii,
            probes_per_radius: self
                .estimation
                .and_then(|e| e.probes_per_radius)
                .unwrap_or(16),
            rule: self.probe_rule(),
        })
    }
}

fn witness_ref(cell: &regularity::ModulusCell) -> String {
    match &cell.witness {
        Some(w) => {
            let mut s = format!("{};t={}", w.probe.describe(), w.t);
            if let Some((lo, hi)) = w.window {
                s.push_str(&format!(";window=[{lo},{hi}]"));
            }
            if let Some(tm) = cell.t_min {
                s.push_str(&format!(";t_min={tm}"));
            }
            s
        }
        None => String::new(),
    }
}

fn modulus_quantity(kind: ModulusKind) -> &'static str {
    match kind {
        ModulusKind::E => "e_modulus",
        ModulusKind::EventualE => "eventual_e_modulus",
        ModulusKind::EventualContinuity => "eventual_continuity_modulus",
    }
}

fn verdict_name(kind: &VerdictKind) -> &'static str {
    match kind {
        VerdictKind::ConsistentWithHolding => "consistent-with-holding",
        VerdictKind::ViolatedWithWitness => "violated-with-witness",
        VerdictKind::Inconclusive => "inconclusive",
    }
}

/// Tabular data: one row per (radius, grid time) with the per-time gap.
/// Moduli and verdicts travel as summary metadata, not data rows.
fn modulus_output(
    id: &str,
    model_label: &str,
    report: &ModulusReport,
    threshold: f64,
) -> RunResult<(Vec<ReportRow>, Vec<VerdictSummary>, Vec<ModulusSummary>)> {
    let quantity = modulus_quantity(report.kind);
    let mut rows = Vec::new();
    for (cell, curve) in report.cells.iter().zip(&report.curves) {
        for point in curve {
            rows.push(ReportRow {
                experiment_id: id.to_string(),
                model: model_label.to_string(),
                quantity: format!("{quantity}_gap"),
                radius: Some(cell.radius),
                t_or_window: point.t.to_string(),
                estimate: point.gap,
                std_error: point.std_error,
                witness_ref: String::new(),
            });
        }
    }
    let moduli = report
        .cells
        .iter()
        .map(|cell| ModulusSummary {
            experiment_id: id.to_string(),
            quantity: quantity.to_string(),
            radius: cell.radius,
            modulus: cell.modulus,
            std_error: cell.std_error,
            t_min: cell.t_min,
            witness_ref: witness_ref(cell),
        })
        .collect();
    let verdict = regularity::classify(report, threshold)?;
    let witness = verdict
        .violating_cell
        .map(|i| witness_ref(&report.cells[i]))
        .unwrap_or_default();
    let verdicts = vec![VerdictSummary {
        experiment_id: id.to_string(),
        quantity: quantity.to_string(),
        verdict: verdict_name(&verdict.kind).to_string(),
        threshold,
        witness_ref: witness,
    }];
    Ok((rows, verdicts, moduli))
}

fn run_modulus(res: &Resolved<'_>, stream: RngStream) -> RunResult<ExperimentResult> {
    let f = res.observable()?;
    let label = res.model.label();
    let kind = res
        .estimation
        .and_then(|e| e.modulus_kind.as_deref())
        .unwrap_or("e");
    let n = res.n_samples();
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut moduli = Vec::new();
    match kind {
        "e" => {
            let report =
                regularity::e_modulus(&res.model, &f, &res.plan()?, &res.t_grid()?, n, stream)?;
            (rows, verdicts, moduli) = modulus_output(&res.id, &label, &report, res.threshold())?;
        }
        "eventual-e" => {
            let t_mins = res
                .grids()?
                .t_mins
                .clone()
                .ok_or_else(|| RunError::Schema("eventual-e needs grids.t_mins".into()))?;
            let report = regularity::eventual_e_modulus(
                &res.model,
                &f,
                &res.plan()?,
                &t_mins,
                &res.t_grid()?,
                n,
                stream,
            )?;
            (rows, verdicts, moduli) = modulus_output(&res.id, &label, &report, res.threshold())?;
        }
        "eventual-continuity" => {
            let windows = res
                .grids()?
                .windows
                .clone()
                .ok_or_else(|| RunError::Schema("eventual-continuity needs grids.windows".into()))?;
            let report = regularity::eventual_continuity_modulus(
                &res.model,
                &f,
                &res.plan()?,
                &windows,
                &res.t_grid()?,
                n,
                stream,
            )?;
            (rows, verdicts, moduli) = modulus_output(&res.id, &label, &report, res.threshold())?;
        }
        "strong-continuity" => {
            // the deficit sup runs over the whole space, not a radius ball
            let probes = match &res.model {
                SemigroupModel::Slide(_) => {
                    let m = res
                        .estimation
                        .and_then(|e| e.probes_per_radius)
                        .unwrap_or(16)
                        .max(2);
                    (0..m)
                        .map(|i| MetricPoint::Unit(i as f64 / (m - 1) as f64))
                        .collect()
                }
                _ => {
                    let plan = res.plan()?;
                    let mut probes = regularity::generate_probes(
                        &res.model,
                        &plan,
                        plan.radii[0],
                        stream.child(1),
                    )?;
                    probes.push(plan.center.clone());
                    probes
                }
            };
            let curve = regularity::strong_continuity_deficit(
                &res.model,
                &f,
                &res.t_grid()?,
                &probes,
                n,
                stream.child(2),
            )?;
            for p in curve {
                rows.push(ReportRow {
                    experiment_id: res.id.clone(),
                    model: label.clone(),
                    quantity: "strong_continuity_deficit".into(),
                    radius: None,
                    t_or_window: p.t.to_string(),
                    estimate: p.deficit,
                    std_error: p.std_error,
                    witness_ref: String::new(),
                });
            }
        }
        "mixing" => {
            let windows = res
                .grids()?
                .windows
                .clone()
                .ok_or_else(|| RunError::Schema("mixing needs grids.windows".into()))?;
            let gaps = regularity::mixing_gap(
                &res.model,
                &f,
                &res.point("x")?,
                &res.point("y")?,
                &windows,
                &res.t_grid()?,
                n,
                stream,
            )?;
            for g in gaps {
                rows.push(ReportRow {
                    experiment_id: res.id.clone(),
                    model: label.clone(),
                    quantity: "mixing_gap".into(),
                    radius: None,
                    t_or_window: format!("[{},{}]", g.window.0, g.window.1),
                    estimate: g.gap,
                    std_error: g.std_error,
                    witness_ref: format!("t={}", g.t_at),
                });
            }
        }
        other => return schema(format!("unknown modulus kind {other:?}")),
    }
    Ok(ExperimentResult {
        experiment_id: res.id.clone(),
        model: label,
        kind: "modulus".into(),
        rows,
        verdicts,
        moduli,
        scalars: vec![],
        decomposition: None,
    })
}

fn run_dual(res: &Resolved<'_>, stream: RngStream) -> RunResult<ExperimentResult> {
    let f = res.observable()?;
    let x = res.point("x")?;
    let grid = res.t_grid()?;
    let n = res.n_samples();
    let label = res.model.label();
    let cells: Vec<(usize, RunResult<(f64, f64)>)> = grid
        .par_iter()
        .enumerate()
        .map(|(ti, &t)| {
            let est = res
                .model
                .estimate_dual(&f, &x, t, n, stream.child(ti as u64))
                .map_err(RunError::from);
            (ti, est)
        })
        .collect();
    let mut rows = Vec::with_capacity(grid.len());
    for (ti, cell) in cells {
        let (est, se) = cell?;
        rows.push(ReportRow {
            experiment_id: res.id.clone(),
            model: label.clone(),
            quantity: "dual".into(),
            radius: None,
            t_or_window: grid[ti].to_string(),
            estimate: est,
            std_error: se,
            witness_ref: x.describe(),
        });
    }
    Ok(ExperimentResult {
        experiment_id: res.id.clone(),
        model: label,
        kind: "dual".into(),
        rows,
        verdicts: vec![],
        moduli: vec![],
        scalars: vec![],
        decomposition: None,
    })
}

fn chain_of(model: &SemigroupModel) -> RunResult<&feller_core::models::chain::FiniteChain> {
    match model {
        SemigroupModel::Chain(c) => Ok(c),
        other => schema(format!("experiment needs a chain model, got {}", other.label())),
    }
}

fn run_decompose(res: &Resolved<'_>) -> RunResult<ExperimentResult> {
    let chain = chain_of(&res.model)?;
    let dc = res
        .decompose
        .ok_or_else(|| RunError::Schema("decompose experiments need a [decompose] section".into()))?;
    let t_max = dc.t_max.unwrap_or(10_000);
    let mut trace =
        decomposition::build_decomposition(chain, dc.x0, &dc.subset, dc.alpha, dc.k, t_max)?;
    let residual = decomposition::verify_telescoping(chain, &mut trace)?;
    let label = res.model.label();
    let rows = trace
        .entry_times
        .iter()
        .enumerate()
        .map(|(i, &s)| ReportRow {
            experiment_id: res.id.clone(),
            model: label.clone(),
            quantity: "entry_time".into(),
            radius: None,
            t_or_window: format!("stage {}", i + 1),
            estimate: s as f64,
            std_error: 0.0,
            witness_ref: String::new(),
        })
        .collect();
    Ok(ExperimentResult {
        experiment_id: res.id.clone(),
        model: label,
        kind: "decompose".into(),
        rows,
        verdicts: vec![],
        moduli: vec![],
        scalars: vec![ScalarSummary {
            experiment_id: res.id.clone(),
            name: "residual_tv".into(),
            value: residual,
        }],
        decomposition: Some(TraceSummary {
            alpha: trace.alpha,
            x0: trace.x0,
            subset: trace.subset.clone(),
            entry_times: trace.entry_times.clone(),
            nus: trace.nus.iter().map(|v| v.entries().to_vec()).collect(),
            mus: trace.mus.iter().map(|v| v.entries().to_vec()).collect(),
            residual_tv: residual,
        }),
    })
}

fn run_cesaro(res: &Resolved<'_>, stream: RngStream) -> RunResult<ExperimentResult> {
    let x = res.point("x")?;
    let grid = res.t_grid()?;
    let n = res.n_samples();
    let mode_cap = res.estimation.and_then(|e| e.mode_cap).unwrap_or(8);
    let reference = match &res.model {
        SemigroupModel::Heat(p) => ergodic::heat_stationary_law(p)?,
        SemigroupModel::Chain(c) => {
            // computed by fixed-point iteration, then certified
            let mu = c.stationary(1e-13, 1_000_000)?;
            let residual = ergodic::invariant_residual(c, &mu)?;
            if residual > 1e-12 {
                return Err(RunError::Computation(CoreError::PreconditionFailed(
                    format!("stationary vector failed certification: residual {residual}"),
                )));
            }
            StationarySpec::ChainVector(mu)
        }
        SemigroupModel::Slide(_) => StationarySpec::SlidePointMass,
        SemigroupModel::RotationTail(_) => StationarySpec::RotationUniform,
    };
    let label = res.model.label();
    let curve = ergodic::cesaro_convergence(&res.model, &x, &reference, &grid, n, mode_cap, stream)?;
    let rows = curve
        .iter()
        .map(|p| ReportRow {
            experiment_id: res.id.clone(),
            model: label.clone(),
            quantity: "cesaro_divergence".into(),
            radius: None,
            t_or_window: p.t.to_string(),
            estimate: p.divergence,
            std_error: 0.0,
            witness_ref: x.describe(),
        })
        .collect();
    Ok(ExperimentResult {
        experiment_id: res.id.clone(),
        model: label,
        kind: "cesaro".into(),
        rows,
        verdicts: vec![],
        moduli: vec![],
        scalars: vec![],
        decomposition: None,
    })
}

fn run_stability(res: &Resolved<'_>, stream: RngStream) -> RunResult<ExperimentResult> {
    let x = res.point("x")?;
    let y = res.point("y")?;
    let grid = res.t_grid()?;
    let n = res.n_samples();
    let mode = match res.estimation.and_then(|e| e.project_mode) {
        Some(k) => W1Mode::ProjectMode(k),
        None => W1Mode::ModelMetric,
    };
    let label = res.model.label();
    let curve = regularity::stability_gap(&res.model, &x, &y, &grid, n, mode, stream)?;
    let rows = curve
        .iter()
        .map(|&(t, w1)| ReportRow {
            experiment_id: res.id.clone(),
            model: label.clone(),
            quantity: "stability_w1".into(),
            radius: None,
            t_or_window: t.to_string(),
            estimate: w1,
            std_error: 0.0,
            witness_ref: format!("{}|{}", x.describe(), y.describe()),
        })
        .collect();
    Ok(ExperimentResult {
        experiment_id: res.id.clone(),
        model: label,
        kind: "stability".into(),
        rows,
        verdicts: vec![],
        moduli: vec![],
        scalars: vec![],
        decomposition: None,
    })
}

fn dispatch(res: &Resolved<'_>, stream: RngStream) -> RunResult<ExperimentResult> {
    match res.kind.as_str() {
        "dual" => run_dual(res, stream),
        "modulus" => run_modulus(res, stream),
        "decompose" => run_decompose(res),
        "cesaro" => run_cesaro(res, stream),
        "stability" => run_stability(res, stream),
        other => schema(format!("unknown experiment kind {other:?}")),
    }
}

fn resolve<'c>(
    id: String,
    kind: String,
    model: Option<&'c crate::config::ModelConfig>,
    observable: Option<&'c crate::config::ObservableConfig>,
    points: Option<&'c crate::config::PointsConfig>,
    grids: Option<&'c GridsConfig>,
    estimation: Option<&'c EstimationConfig>,
    decompose: Option<&'c DecomposeConfig>,
) -> RunResult<Resolved<'c>> {
    let model = model
        .ok_or_else(|| RunError::Schema("experiment needs a [model] section".into()))?
        .build()
        .or_else(schema)?;
    Ok(Resolved {
        id,
        kind,
        model,
        observable,
        points,
        grids,
        estimation,
        decompose,
    })
}

/// Runs the configured experiment(s) under `seed` and assembles the
/// reproducible bundle.
pub fn run_experiment(config: &ConfigFile, seed: u64) -> RunResult<ReportBundle> {
    let kind = config
        .experiment
        .clone()
        .ok_or_else(|| RunError::Schema("config needs an `experiment` kind".into()))?;
    let root = RngStream::new(seed);
    let mut effective = config.clone();
    effective.seed = Some(seed);
    let echo = effective.echo();

    let mut experiments = Vec::new();
    if kind == "report-bundle" {
        if config.experiments.is_empty() {
            return schema("report-bundle needs at least one [[experiments]] entry");
        }
        for (i, sub) in config.experiments.iter().enumerate() {
            let res = resolve_sub(sub, config)?;
            experiments.push(dispatch(&res, root.child(i as u64))?);
        }
    } else {
        let res = resolve(
            "main".into(),
            kind,
            config.model.as_ref(),
            config.observable.as_ref(),
            config.points.as_ref(),
            config.grids.as_ref(),
            config.estimation.as_ref(),
            config.decompose.as_ref(),
        )?;
        experiments.push(dispatch(&res, root.child(0))?);
    }
    Ok(ReportBundle {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config_echo: echo,
        experiments,
    })
}

fn resolve_sub<'c>(sub: &'c SubExperiment, root: &'c ConfigFile) -> RunResult<Resolved<'c>> {
    // sub-experiment sections fall back to the top-level ones
    resolve(
        sub.id.clone(),
        sub.experiment.clone(),
        sub.model.as_ref().or(root.model.as_ref()),
        sub.observable.as_ref().or(root.observable.as_ref()),
        sub.points.as_ref().or(root.points.as_ref()),
        sub.grids.as_ref().or(root.grids.as_ref()),
        sub.estimation.as_ref().or(root.estimation.as_ref()),
        sub.decompose.as_ref().or(root.decompose.as_ref()),
    )
}

/// The model's natural time kind, exposed for grid sanity messages.
pub fn model_time_kind(model: &SemigroupModel) -> TimeKind {
    model.time_kind()
}
