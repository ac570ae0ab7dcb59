//! Scenario configs, grid sweeps, chart comparison and reports.

mod compare;
mod config;
mod report;
mod run;

use thiserror::Error;

use crate::error::GeomError;

pub use compare::{compare_immersions, Comparison, ComparisonRow, CONGRUENCE_CAVEAT};
pub use config::{build_ruled, BuiltinChart, ChartSpec, GridSpec, RuledSource, Scenario, ScenarioConfig, SeedSource, FRAME_STEP};
pub use report::{
    emit_report, points_csv, Evidence, OutputFormat, PointRow, ReconstructionSummary, Report, Summary, Timing, Verdict,
    VerdictValue, RIGIDITY_LIMITATION, SCHEMA_VERSION,
};
pub use run::{run_scenario, RunOptions, PASS_FRACTION};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("i/o: {0}")]
    Io(String),
    #[error("serialization: {0}")]
    Serialize(String),
}
