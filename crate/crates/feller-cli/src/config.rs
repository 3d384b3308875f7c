//! TOML experiment configuration.
//!
//! The schema is strict (`deny_unknown_fields`): misspelled keys are
//! schema errors, not silent defaults. The seed is mandatory — either in
//! the file or via `--seed`.

use feller_core::models::chain::FiniteChain;
use feller_core::models::heat::{HeatModelParams, SigmaRule};
use feller_core::models::rotation::RotationParams;
use feller_core::models::slide::{SlideMetric, SlideParams};
use feller_core::observable::{
    chain_observable, distance_to, embedded_coordinate, mode_coefficient, sin_h1_norm,
};
use feller_core::space::{MetricPoint, RotationPoint, SpectralState};
use feller_core::{SemigroupModel, TestFunction};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// dual | modulus | decompose | cesaro | stability | report-bundle
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub experiments: Vec<SubExperiment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<PointsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grids: Option<GridsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimation: Option<EstimationConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decompose: Option<DecomposeConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

/// One named entry of a report bundle; carries a full experiment config.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SubExperiment {
    pub id: String,
    pub experiment: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<PointsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grids: Option<GridsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimation: Option<EstimationConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decompose: Option<DecomposeConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// heat | rotation | slide | chain
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_modes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
    /// rho | d
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    /// coordinate | mode | distance-to | sin-h1 | indicator-one | chain-values
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<PointConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    /// unit | interval | tail | chain | spectral | spectral-zero | spectral-inverse-k
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<u64>,
    /// `[[mode, coefficient], ...]`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<(i32, f64)>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PointsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<PointConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<PointConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<PointConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_log: Option<RangeSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_lin: Option<RangeSpec>,
    /// Exhaustive integer grid `lo..=hi` for discrete-time models.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_int: Option<IntRangeSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_mins: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IntRangeSpec {
    pub lo: u64,
    pub hi: u64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes_per_radius: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_probe_mode: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// e | eventual-e | eventual-continuity | strong-continuity | mixing
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modulus_kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub project_mode: Option<i32>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub x0: usize,
    pub subset: Vec<usize>,
    pub alpha: f64,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// csv | json | both
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    /// Serializes the effective config; the echo embedded in every
    /// report re-parses to the same experiment.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<SemigroupModel, String> {
        match self.kind.as_str() {
            "heat" => {
                let n = self.n_modes.unwrap_or(256);
                let rule = SigmaRule::PowerLaw {
                    scale: self.sigma_scale.unwrap_or(1.0),
                    exponent: self.sigma_exponent.unwrap_or(1.0),
                };
                HeatModelParams::new(n, rule)
                    .map(SemigroupModel::Heat)
                    .map_err(|e| e.to_string())
            }
            "rotation" => {
                let gamma = self
                    .gamma
                    .unwrap_or(-std::f64::consts::FRAC_1_SQRT_2);
                let n_max = self.n_max.unwrap_or(10_000);
                RotationParams::new(gamma, n_max)
                    .map(SemigroupModel::RotationTail)
                    .map_err(|e| e.to_string())
            }
            "slide" => {
                let metric = match self.metric.as_deref().unwrap_or("rho") {
                    "rho" => SlideMetric::Rho,
                    "d" => SlideMetric::D,
                    other => return Err(format!("unknown slide metric {other:?}")),
                };
                Ok(SemigroupModel::Slide(SlideParams::new(metric)))
            }
            "chain" => {
                let rows = self
                    .rows
                    .clone()
                    .ok_or_else(|| "chain model needs rows".to_string())?;
                FiniteChain::new(rows)
                    .map(SemigroupModel::Chain)
                    .map_err(|e| e.to_string())
            }
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

impl PointConfig {
    pub fn build(&self, model: &SemigroupModel) -> Result<MetricPoint, String> {
        let point = match self.kind.as_str() {
            "unit" => MetricPoint::Unit(self.value.ok_or("unit point needs value")?),
            "interval" => MetricPoint::IntervalOrTail(RotationPoint::Interval(
                self.value.ok_or("interval point needs value")?,
            )),
            "tail" => MetricPoint::IntervalOrTail(RotationPoint::Tail(
                self.index.ok_or("tail point needs index")? as u32,
            )),
            "chain" => MetricPoint::Chain(self.index.ok_or("chain point needs index")? as usize),
            "spectral" => {
                let n = heat_modes(model)?;
                let modes = self.modes.clone().unwrap_or_default();
                MetricPoint::Spectral(
                    SpectralState::from_modes(n, &modes).map_err(|e| e.to_string())?,
                )
            }
            "spectral-zero" => MetricPoint::Spectral(SpectralState::zero(heat_modes(model)?)),
            "spectral-inverse-k" => MetricPoint::Spectral(
                feller_core::models::heat::inverse_mode_state(heat_modes(model)?),
            ),
            other => return Err(format!("unknown point kind {other:?}")),
        };
        model.validate_point(&point).map_err(|e| e.to_string())?;
        Ok(point)
    }
}

fn heat_modes(model: &SemigroupModel) -> Result<usize, String> {
    match model {
        SemigroupModel::Heat(p) => Ok(p.n_modes()),
        other => Err(format!(
            "spectral points need the heat model, got {}",
            other.label()
        )),
    }
}

impl ObservableConfig {
    pub fn build(&self, model: &SemigroupModel) -> Result<TestFunction, String> {
        let cap = self.cap.unwrap_or(1.0);
        match self.kind.as_str() {
            "coordinate" => Ok(embedded_coordinate(cap)),
            "mode" => Ok(mode_coefficient(self.mode.unwrap_or(1), cap)),
            "sin-h1" => Ok(sin_h1_norm()),
            "indicator-one" => Ok(TestFunction::new("ind{1}", 1.0, 1.0, |x| match x {
                MetricPoint::Unit(u) => {
                    if *u == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                _ => f64::NAN,
            })),
            "chain-values" => {
                let values = self
                    .values
                    .clone()
                    .ok_or_else(|| "chain-values observable needs values".to_string())?;
                Ok(chain_observable(values))
            }
            "distance-to" => {
                let anchor = self
                    .anchor
                    .as_ref()
                    .ok_or_else(|| "distance-to observable needs an anchor".to_string())?
                    .build(model)?;
                Ok(distance_to(model, anchor, cap))
            }
            other => Err(format!("unknown observable kind {other:?}")),
        }
    }
}

impl GridsConfig {
    /// Resolves the time grid: explicit values win, then log/linear/integer
    /// range specs.
    pub fn t_grid(&self) -> Result<Vec<f64>, String> {
        if let Some(v) = &self.t_values {
            return Ok(v.clone());
        }
        if let Some(r) = self.t_log {
            if r.count < 2 || !(r.lo > 0.0) || !(r.hi > r.lo) {
                return Err("t_log needs 0 < lo < hi and count >= 2".into());
            }
            let (llo, lhi) = (r.lo.ln(), r.hi.ln());
            return Ok((0..r.count)
                .map(|i| (llo + (lhi - llo) * i as f64 / (r.count - 1) as f64).exp())
                .collect());
        }
        if let Some(r) = self.t_lin {
            if r.count < 2 || !(r.hi > r.lo) {
                return Err("t_lin needs lo < hi and count >= 2".into());
            }
            return Ok((0..r.count)
                .map(|i| r.lo + (r.hi - r.lo) * i as f64 / (r.count - 1) as f64)
                .collect());
        }
        if let Some(r) = self.t_int {
            if r.lo == 0 || r.hi < r.lo {
                return Err("t_int needs 1 <= lo <= hi".into());
            }
            return Ok((r.lo..=r.hi).map(|t| t as f64).collect());
        }
        Err("no time grid given (t_values, t_log, t_lin or t_int)".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_minimal_modulus_config() {
        let text = r#"
seed = 7
experiment = "modulus"

[model]
kind = "slide"
metric = "rho"

[points]
center = { kind = "unit", value = 0.5 }

[grids]
radii = [0.2, 0.1]
t_lin = { lo = 0.05, hi = 2.0, count = 10 }

[estimation]
modulus_kind = "e"
"#;
        let cfg = ConfigFile::parse(text).unwrap();
        assert_eq!(cfg.seed, Some(7));
        let model = cfg.model.as_ref().unwrap().build().unwrap();
        assert_eq!(model.label(), "slide(Rho)");
        let grid = cfg.grids.as_ref().unwrap().t_grid().unwrap();
        assert_eq!(grid.len(), 10);
        // echo round-trips
        let echo = cfg.echo();
        let again = ConfigFile::parse(&echo).unwrap();
        assert_eq!(again.seed, Some(7));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "seed = 1\nexperimnt = \"dual\"\n";
        assert!(ConfigFile::parse(text).is_err());
    }

    #[test]
    fn point_and_model_validation() {
        let mc = ModelConfig {
            kind: "chain".into(),
            n_modes: None,
            sigma_scale: None,
            sigma_exponent: None,
            gamma: None,
            n_max: None,
            metric: None,
            rows: Some(vec![vec![0.5, 0.5], vec![1.0, 0.0]]),
        };
        let model = mc.build().unwrap();
        let good = PointConfig {
            kind: "chain".into(),
            value: None,
            index: Some(1),
            modes: None,
        };
        assert!(good.build(&model).is_ok());
        let bad = PointConfig {
            kind: "chain".into(),
            value: None,
            index: Some(5),
            modes: None,
        };
        assert!(bad.build(&model).is_err());
    }
}
