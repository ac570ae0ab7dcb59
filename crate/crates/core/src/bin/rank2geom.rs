use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rank2geom::harness::{emit_report, run_scenario, OutputFormat, RunOptions, ScenarioConfig};

const OUT_DIR_ENV: &str = "RANK2GEOM_OUT_DIR";

#[derive(Parser)]
#[command(name = "rank2geom", version, about = "Run rank-two submanifold scenarios and write reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file (.toml or .json).
    Run {
        config: PathBuf,
        /// Overrides the seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; falls back to the config, then $RANK2GEOM_OUT_DIR, then ./reports.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Multiplies every tolerance.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
            Format::Both => OutputFormat::Both,
        }
    }
}

fn main() -> ExitCode {
    let Command::Run { config, seed, out, format, tol_scale } = Cli::parse().command;
    let result = ScenarioConfig::load(&config).and_then(|cfg| {
        let report = run_scenario(&cfg, RunOptions { seed, tol_scale })?;
        let dir = out
            .or_else(|| cfg.output.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("reports"));
        let files = emit_report(&report, &dir, format.into())?;
        Ok((report, files))
    });
    match result {
        Ok((report, files)) => {
            println!(
                "{} ({}): {} of {} points accepted",
                report.scenario.name,
                report.scenario.scenario.kind(),
                report.summary.accepted_points,
                report.summary.total_points
            );
            for v in &report.verdicts {
                let note = v.note.as_deref().map(|n| format!("  [{n}]")).unwrap_or_default();
                println!("  {:<28} {:?}{note}", v.name, v.value);
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
