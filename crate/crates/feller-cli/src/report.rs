//! Report bundle and its CSV / JSON serializations.
//!
//! The bundle body is deterministic: two runs of the same config produce
//! byte-identical CSV text and byte-identical `report` subtrees in the
//! JSON file. Timestamps live only in the separate `meta` object.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const CSV_HEADER: &str =
    "experiment_id,model,quantity,radius,t_or_window,estimate,std_error,witness_ref";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment_id: String,
    pub model: String,
    pub quantity: String,
    pub radius: Option<f64>,
    pub t_or_window: String,
    pub estimate: f64,
    pub std_error: f64,
    pub witness_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub experiment_id: String,
    pub quantity: String,
    pub verdict: String,
    pub threshold: f64,
    pub witness_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub experiment_id: String,
    pub name: String,
    pub value: f64,
}

/// Per-radius modulus with its extremal witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusSummary {
    pub experiment_id: String,
    pub quantity: String,
    pub radius: f64,
    pub modulus: f64,
    pub std_error: f64,
    pub t_min: Option<f64>,
    pub witness_ref: String,
}

/// Stage-by-stage decomposition record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub alpha: f64,
    pub x0: usize,
    pub subset: Vec<usize>,
    pub entry_times: Vec<u64>,
    pub nus: Vec<Vec<f64>>,
    pub mus: Vec<Vec<f64>>,
    pub residual_tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment_id: String,
    pub model: String,
    pub kind: String,
    /// Plot-ready tabular data: exactly the grid-product rows.
    pub rows: Vec<ReportRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<VerdictSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub moduli: Vec<ModulusSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scalars: Vec<ScalarSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<TraceSummary>,
}

/// Machine-readable summary of one run: every number needed to reproduce
/// it travels along (config echo, seed, tool version).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub tool_version: String,
    pub seed: u64,
    pub config_echo: String,
    pub experiments: Vec<ExperimentResult>,
}

impl ReportBundle {
    pub fn rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.experiments.iter().flat_map(|e| e.rows.iter())
    }

    /// Deterministic CSV body: config echo and summaries (moduli,
    /// verdicts, residuals) as `#` comments, fixed header, then exactly
    /// the tabular rows — the data-row count equals the grid product.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# tool_version: {}\n", self.tool_version));
        out.push_str(&format!("# seed: {}\n", self.seed));
        for line in self.config_echo.lines() {
            out.push_str("# config: ");
            out.push_str(line);
            out.push('\n');
        }
        for exp in &self.experiments {
            for m in &exp.moduli {
                let t_min = m.t_min.map(|t| format!(" t_min={t}")).unwrap_or_default();
                out.push_str(&format!(
                    "# modulus: id={} quantity={} radius={} value={} std_error={}{} witness={}\n",
                    m.experiment_id, m.quantity, m.radius, m.modulus, m.std_error, t_min,
                    m.witness_ref
                ));
            }
            for v in &exp.verdicts {
                out.push_str(&format!(
                    "# verdict: id={} quantity={} verdict={} threshold={} witness={}\n",
                    v.experiment_id, v.quantity, v.verdict, v.threshold, v.witness_ref
                ));
            }
            for s in &exp.scalars {
                out.push_str(&format!(
                    "# scalar: id={} {}={}\n",
                    s.experiment_id, s.name, s.value
                ));
            }
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for exp in &self.experiments {
            for row in &exp.rows {
                let radius = row.radius.map(|r| r.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    csv_field(&row.experiment_id),
                    csv_field(&row.model),
                    csv_field(&row.quantity),
                    radius,
                    csv_field(&row.t_or_window),
                    row.estimate,
                    row.std_error,
                    csv_field(&row.witness_ref),
                ));
            }
        }
        out
    }

    /// Deterministic JSON body.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    /// Full JSON file: `meta` (timestamp) + deterministic `report`.
    pub fn to_json_file_string(&self, generated_unix_ms: u128) -> String {
        let meta = serde_json::json!({
            "generated_unix_ms": generated_unix_ms.to_string(),
            "tool_version": self.tool_version,
        });
        let body: serde_json::Value = serde_json::to_value(self).expect("bundle serializes");
        serde_json::to_string_pretty(&serde_json::json!({
            "meta": meta,
            "report": body,
        }))
        .expect("file serializes")
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_csv_string().as_bytes())
    }

    pub fn write_json(&self, path: &Path, generated_unix_ms: u128) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_json_file_string(generated_unix_ms).as_bytes())?;
        file.write_all(b"\n")
    }
}

// Quote a CSV field only when needed; the writer never emits newlines
// inside fields.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_bundle() -> ReportBundle {
        ReportBundle {
            tool_version: "0.1.0".into(),
            seed: 42,
            config_echo: "seed = 42\n".into(),
            experiments: vec![ExperimentResult {
                experiment_id: "exp".into(),
                model: "slide(Rho)".into(),
                kind: "modulus".into(),
                rows: vec![ReportRow {
                    experiment_id: "exp".into(),
                    model: "slide(Rho)".into(),
                    quantity: "e_modulus".into(),
                    radius: Some(0.1),
                    t_or_window: "0.5".into(),
                    estimate: 0.1,
                    std_error: 0.0,
                    witness_ref: "unit(0.6);t=0.5".into(),
                }],
                verdicts: vec![VerdictSummary {
                    experiment_id: "exp".into(),
                    quantity: "e_modulus".into(),
                    verdict: "consistent-with-holding".into(),
                    threshold: 0.2,
                    witness_ref: String::new(),
                }],
                moduli: vec![],
                scalars: vec![],
                decomposition: None,
            }],
        }
    }

    #[test]
    fn csv_has_fixed_header_and_row_counts() {
        let text = sample_bundle().to_csv_string();
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.count(), 1); // data rows only; the verdict is a comment
        assert!(text.lines().any(|l| l.starts_with("# verdict:")));
    }

    #[test]
    fn empty_bundle_gives_header_only_csv() {
        let mut b = sample_bundle();
        b.experiments.clear();
        let text = b.to_csv_string();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, vec![CSV_HEADER]);
    }

    #[test]
    fn json_round_trips_exactly() {
        let b = sample_bundle();
        let text = b.to_json_string();
        let back: ReportBundle = serde_json::from_str(&text).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn json_file_isolates_timestamp_in_meta() {
        let b = sample_bundle();
        let f1 = b.to_json_file_string(1);
        let f2 = b.to_json_file_string(2);
        let v1: serde_json::Value = serde_json::from_str(&f1).unwrap();
        let v2: serde_json::Value = serde_json::from_str(&f2).unwrap();
        assert_ne!(v1["meta"], v2["meta"]);
        assert_eq!(v1["report"], v2["report"]);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("q\"q"), "\"q\"\"q\"");
    }
}
