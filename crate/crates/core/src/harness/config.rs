use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::constructors::{
    integrate_frame, random_ruled_input, ruled_chart, Coeff1D, FramePath, PolarSurfaceInput, PolyTable,
    ReconstructOptions, RuledFrameInput, SurfaceFamily,
};
use crate::error::{GeomError, GeomResult};
use crate::immersion::{builtin, DomainBox, ImmersionChart, PolyTerm};
use crate::tolerances::Tolerances;

/// Step of the frame integrator used by every ruled fixture.
pub const FRAME_STEP: f64 = 1e-3;

/// A scenario file. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Used by seeded fixtures that carry no seed of their own.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Partial overrides of the default thresholds.
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    GenerateRuled {
        frame: RuledSource,
        grid: GridSpec,
    },
    Deform {
        frame: RuledSource,
        /// Gauge angles `θ(s)`; each one yields a comparison with the original.
        thetas: Vec<Coeff1D>,
        grid: GridSpec,
    },
    GeneratePolar {
        input: PolarSurfaceInput,
        grid: GridSpec,
    },
    ReconstructPolar {
        input: PolarSurfaceInput,
        options: ReconstructOptions,
        #[serde(default)]
        seed_from: SeedSource,
        /// Repeat on the refined grid and report the convergence ratios.
        #[serde(default = "yes")]
        convergence: bool,
    },
    Analyze {
        chart: ChartSpec,
        grid: GridSpec,
    },
    Compare {
        a: ChartSpec,
        b: ChartSpec,
        /// Apply a seeded rigid motion to `b`.
        #[serde(default)]
        rigid_motion_b: Option<u64>,
        grid: GridSpec,
    },
}

fn yes() -> bool {
    true
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::GenerateRuled { .. } => "generate_ruled",
            Scenario::Deform { .. } => "deform",
            Scenario::GeneratePolar { .. } => "generate_polar",
            Scenario::ReconstructPolar { .. } => "reconstruct_polar",
            Scenario::Analyze { .. } => "analyze",
            Scenario::Compare { .. } => "compare",
        }
    }
}

/// Initial data of the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    /// Values read off the surface the polar was built from.
    #[default]
    Reference,
    /// `φ = 1`, `σ = 0`.
    Canonical,
}

/// Where a ruled frame input comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuledSource {
    Example { n: usize },
    Random {
        n: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Explicit { input: RuledFrameInput },
}

impl RuledSource {
    pub fn resolve(&self, seed: u64) -> GeomResult<RuledFrameInput> {
        match self {
            RuledSource::Example { n } => {
                if *n < 2 {
                    return Err(GeomError::InvalidInput("ruled construction needs n ≥ 2".into()));
                }
                Ok(RuledFrameInput::example(*n))
            }
            RuledSource::Random { n, seed: own } => random_ruled_input(*n, own.unwrap_or(seed)),
            RuledSource::Explicit { input } => {
                input.validate()?;
                Ok(input.clone())
            }
        }
    }
}

/// Integrates the frame and builds the chart.
pub fn build_ruled(input: &RuledFrameInput) -> GeomResult<(FramePath, ImmersionChart)> {
    let path = integrate_frame(input, FRAME_STEP)?;
    let chart = ruled_chart(input, &path)?;
    Ok((path, chart))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinChart {
    Plane,
    Cylinder,
    GraphSurface,
    GraphProduct,
    ComplexSquare,
}

/// A chart to analyze or compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "chart", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartSpec {
    Builtin {
        name: BuiltinChart,
    },
    /// One coefficient table per ambient coordinate, rows `[coeff, p_1, ..., p_dim]`.
    Polynomial {
        dim: usize,
        coordinates: Vec<PolyTable>,
        domain: DomainBox,
    },
    Surface {
        surface: SurfaceFamily,
        domain: DomainBox,
    },
    Ruled {
        frame: RuledSource,
    },
    Polar {
        input: PolarSurfaceInput,
    },
}

impl ChartSpec {
    pub fn build(&self, seed: u64, tol: &Tolerances) -> GeomResult<ImmersionChart> {
        match self {
            ChartSpec::Builtin { name } => Ok(match name {
                BuiltinChart::Plane => builtin::plane(2, 2),
                BuiltinChart::Cylinder => builtin::cylinder(),
                BuiltinChart::GraphSurface => builtin::graph_surface(),
                BuiltinChart::GraphProduct => builtin::graph_product(),
                BuiltinChart::ComplexSquare => builtin::complex_square(),
            }),
            ChartSpec::Polynomial { dim, coordinates, domain } => {
                let terms = coordinates.iter().map(|c| c.terms(*dim)).collect::<GeomResult<Vec<Vec<PolyTerm>>>>()?;
                builtin::polynomial("polynomial", *dim, terms, domain.clone())
            }
            ChartSpec::Surface { surface, domain } => surface.chart(domain.clone()),
            ChartSpec::Ruled { frame } => Ok(build_ruled(&frame.resolve(seed)?)?.1),
            ChartSpec::Polar { input } => {
                let map = crate::constructors::section_map(input, tol)?;
                Ok(crate::constructors::polar_extension(map, input.half_width)?.chart)
            }
        }
    }
}

/// Regular grid over the chart domain shrunk by `shrink` towards its centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub counts: Vec<usize>,
    #[serde(default = "default_shrink")]
    pub shrink: f64,
}

fn default_shrink() -> f64 {
    0.9
}

impl GridSpec {
    pub fn points(&self, domain: &DomainBox) -> GeomResult<Vec<Vec<f64>>> {
        if self.counts.len() != domain.dim() {
            return Err(GeomError::GridMismatch(format!(
                "{} grid counts for a {}-dimensional domain",
                self.counts.len(),
                domain.dim()
            )));
        }
        if !(self.shrink > 0.0 && self.shrink <= 1.0) {
            return Err(GeomError::InvalidInput(format!("grid shrink {} outside (0, 1]", self.shrink)));
        }
        domain.shrunk(self.shrink).grid(&self.counts)
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a `.toml` or `.json` file; other extensions are tried as JSON.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            _ => Self::from_json(&text),
        }
    }
}
