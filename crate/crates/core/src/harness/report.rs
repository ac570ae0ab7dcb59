use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::compare::Comparison;
use super::config::ScenarioConfig;
use super::HarnessError;
use crate::constructors::SurfaceReport;
use crate::parabolic::PointAnalysis;
use crate::tolerances::Tolerances;

pub const SCHEMA_VERSION: u32 = 1;

/// Stated in every report.
pub const RIGIDITY_LIMITATION: &str = "Isometric rigidity of nonruled parabolic submanifolds is not \
reproduced numerically: uniqueness up to rigid motion is out of reach of grid evaluation. The suite \
certifies the identities used in its proof and the ruled and polar detector dichotomies instead.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictValue {
    True,
    False,
    Inconclusive,
    /// The question does not apply; the reason is in the note.
    OutOfScope,
}

impl From<bool> for VerdictValue {
    fn from(b: bool) -> Self {
        if b {
            VerdictValue::True
        } else {
            VerdictValue::False
        }
    }
}

/// One measured quantity backing a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub quantity: String,
    pub value: f64,
    pub threshold: Option<f64>,
    /// Grid point where `value` was attained, when it is a pointwise extreme.
    pub point: Option<Vec<f64>>,
}

impl Evidence {
    pub fn new(quantity: impl Into<String>, value: f64, threshold: Option<f64>) -> Self {
        Evidence { quantity: quantity.into(), value, threshold, point: None }
    }

    pub fn at(mut self, point: &[f64]) -> Self {
        self.point = Some(point.to_vec());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: VerdictValue,
    pub note: Option<String>,
    pub evidence: Vec<Evidence>,
}

/// One analyzed grid point plus scenario-specific checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub analysis: PointAnalysis,
    #[serde(default)]
    pub checks: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total_points: usize,
    pub accepted_points: usize,
    pub no_accepted_points: bool,
    pub parabolic_fraction: Option<f64>,
    /// Largest value of each residual over accepted points.
    pub max_residuals: BTreeMap<String, f64>,
    /// Rejection reasons and their counts.
    pub rejections: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub u_axis: usize,
    pub v_axis: usize,
    pub counts: [usize; 2],
    pub curl_residual: f64,
    pub path_discrepancy: f64,
    pub tangent_residual: f64,
    /// Absent when no interior node has a nonzero second difference.
    pub first_normal_ratio: Option<f64>,
    pub asymptotic_ratio: f64,
    pub min_theta: f64,
    pub refined_curl_residual: Option<f64>,
    pub refined_tangent_residual: Option<f64>,
    pub curl_ratio: Option<f64>,
    pub tangent_ratio: Option<f64>,
}

/// Wall-clock data, kept in one field so determinism checks can drop it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub points: Vec<PointRow>,
    pub surface: Option<SurfaceReport>,
    pub comparisons: Vec<Comparison>,
    pub reconstruction: Option<ReconstructionSummary>,
    pub summary: Summary,
    pub verdicts: Vec<Verdict>,
    pub limitation: String,
    pub timing: Option<Timing>,
}

impl Report {
    /// The report with the timing field cleared.
    pub fn masked(&self) -> Report {
        Report { timing: None, ..self.clone() }
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        serde_json::to_string_pretty(self).map_err(|e| HarnessError::Serialize(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Report, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Serialize(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Both,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.15e}")).unwrap_or_default()
}

fn write_points_csv<W: std::io::Write>(out: W, points: &[PointRow]) -> Result<(), HarnessError> {
    let io = |e: csv::Error| HarnessError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let accepted: Vec<&PointRow> = points.iter().filter(|p| p.analysis.accepted()).collect();
    let dim = points.first().map_or(0, |p| p.analysis.point.len());
    let splits = accepted.iter().map(|p| p.analysis.m.len()).max().unwrap_or(0);
    let check_keys: Vec<String> = accepted.first().map(|p| p.checks.keys().cloned().collect()).unwrap_or_default();
    let scalar = [
        "a", "b", "c", "off_pattern", "dif_symmetry", "surface_like_residual", "ruled_residual", "r_first", "r_second",
        "r_igual", "omega_z", "omega_x", "gauss", "codazzi", "ricci",
    ];
    let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    header.extend(["nu", "rank", "first_normal_dim", "kind", "asymptotic_count"].map(String::from));
    header.extend(scalar.iter().map(|s| s.to_string()));
    header.extend((0..splits).flat_map(|j| [format!("m{j}"), format!("n{j}")]));
    header.extend(check_keys.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for p in accepted {
        let a = &p.analysis;
        let mut rec: Vec<String> = a.point.iter().map(|x| cell(Some(*x))).collect();
        let int = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        rec.extend([int(a.nu), int(a.rank), int(a.first_normal_dim)]);
        rec.push(a.kind.map(|k| k.as_str().to_string()).unwrap_or_default());
        rec.push(int(a.asymptotic_count));
        for v in [
            a.a, a.b, a.c, a.off_pattern, a.dif_symmetry, a.surface_like_residual, a.ruled_residual, a.r_first,
            a.r_second, a.r_igual, a.omega_z, a.omega_x, a.gauss, a.codazzi, a.ricci,
        ] {
            rec.push(cell(v));
        }
        for j in 0..splits {
            rec.push(cell(a.m.get(j).copied()));
            rec.push(cell(a.n.get(j).copied()));
        }
        for k in &check_keys {
            rec.push(cell(p.checks.get(k).copied()));
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

fn write_comparison_csv<W: std::io::Write>(out: W, comparisons: &[Comparison]) -> Result<(), HarnessError> {
    let io = |e: csv::Error| HarnessError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let dim = comparisons.first().and_then(|c| c.rows.first()).map_or(0, |r| r.point.len());
    let mut header = vec!["pair".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.extend(["metric_diff", "invariant_diff"].map(String::from));
    w.write_record(&header).map_err(io)?;
    for (k, c) in comparisons.iter().enumerate() {
        for r in &c.rows {
            let mut rec = vec![k.to_string()];
            rec.extend(r.point.iter().map(|x| cell(Some(*x))));
            rec.push(cell(Some(r.metric_diff)));
            rec.push(cell(r.invariant_diff));
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

/// Point table as CSV: a header, then one row per accepted point.
pub fn points_csv(report: &Report) -> Result<String, HarnessError> {
    let mut buf = Vec::new();
    write_points_csv(&mut buf, &report.points)?;
    String::from_utf8(buf).map_err(|e| HarnessError::Serialize(e.to_string()))
}

/// Writes `<name>.json` and/or `<name>.csv` (plus `<name>.comparison.csv`
/// for scenarios with comparisons) into `dir` and returns the paths.
pub fn emit_report(report: &Report, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |p: &Path, e: std::io::Error| HarnessError::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let stem = &report.scenario.name;
    let mut written = Vec::new();
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        let p = dir.join(format!("{stem}.json"));
        std::fs::write(&p, report.to_json()?).map_err(|e| io(&p, e))?;
        written.push(p);
    }
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        let p = dir.join(format!("{stem}.csv"));
        let f = std::fs::File::create(&p).map_err(|e| io(&p, e))?;
        write_points_csv(f, &report.points)?;
        written.push(p);
        if !report.comparisons.is_empty() {
            let p = dir.join(format!("{stem}.comparison.csv"));
            let f = std::fs::File::create(&p).map_err(|e| io(&p, e))?;
            write_comparison_csv(f, &report.comparisons)?;
            written.push(p);
        }
    }
    Ok(written)
}
