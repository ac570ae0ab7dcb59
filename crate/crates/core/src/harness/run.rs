use std::collections::BTreeMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use super::compare::{compare_immersions, Comparison, CONGRUENCE_CAVEAT};
use super::config::{build_ruled, GridSpec, ScenarioConfig, Scenario, SeedSource};
use super::report::{
    Evidence, PointRow, ReconstructionSummary, Report, Summary, Timing, Verdict, VerdictValue, RIGIDITY_LIMITATION,
    SCHEMA_VERSION,
};
use super::HarnessError;
use crate::constructors::{
    construct_polar, gauge_deformation, polar_extension, ruling_tangency_residual, section_map, PolarSeed,
    ReconstructOptions,
};
use crate::immersion::{ImmersionChart, RigidMotion};
use crate::parabolic::analyze_point;
use crate::tolerances::{Detection, Tolerances};

/// Share of accepted points a fractional verdict needs.
pub const PASS_FRACTION: f64 = 0.95;
/// Gauss, Codazzi and Ricci residual bound.
pub const FUNDAMENTAL_PASS: f64 = 1e-6;
/// Off-pattern residual bound of the splitting tensor.
pub const SPLITTING_PASS: f64 = 1e-6;
/// Bound on `f_{s t_j} − b_j e_1` for ruled charts.
pub const TANGENCY_PASS: f64 = 1e-9;
/// Principal-angle bound between `T_Ψ` and the normal space of `g`.
pub const POLAR_TANGENT_PASS: f64 = 1e-7;
/// Principal-angle bound for reconstructed surfaces (finite differences).
pub const RECONSTRUCTED_TANGENT_PASS: f64 = 1e-3;
/// Curl reduction expected from a second-order scheme under 2× refinement.
pub const CONVERGENCE_RATIO: f64 = 3.0;
/// Finite-difference parabolicity thresholds for reconstructed surfaces.
pub const FD_FIRST_NORMAL_FLOOR: f64 = 1e-3;
pub const FD_ASYMPTOTIC_CEIL: f64 = 1e-2;

/// Command-line overrides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub tol_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: None, tol_scale: 1.0 }
    }
}

fn analyze_grid(chart: &ImmersionChart, grid: &GridSpec, tol: &Tolerances) -> Result<Vec<PointRow>, HarnessError> {
    let points = grid.points(chart.domain())?;
    Ok(points
        .par_iter()
        .map(|p| PointRow { analysis: analyze_point(chart, p, tol), checks: BTreeMap::new() })
        .collect())
}

fn summarize(points: &[PointRow]) -> Summary {
    let accepted: Vec<&PointRow> = points.iter().filter(|p| p.analysis.accepted()).collect();
    let mut max_residuals = BTreeMap::new();
    let mut bump = |k: &str, v: Option<f64>| {
        if let Some(v) = v {
            let e = max_residuals.entry(k.to_string()).or_insert(0.0_f64);
            *e = e.max(v);
        }
    };
    for p in &accepted {
        let a = &p.analysis;
        for (k, v) in [
            ("gauss", a.gauss),
            ("codazzi", a.codazzi),
            ("ricci", a.ricci),
            ("off_pattern", a.off_pattern),
            ("dif_symmetry", a.dif_symmetry),
            ("r_first", a.r_first),
            ("r_second", a.r_second),
            ("r_igual", a.r_igual),
            ("ruled_residual", a.ruled_residual),
            ("surface_like_residual", a.surface_like_residual),
        ] {
            bump(k, v);
        }
        for (k, v) in &p.checks {
            bump(k, Some(*v));
        }
    }
    let mut rejections = BTreeMap::new();
    for p in points.iter().filter(|p| !p.analysis.accepted()) {
        *rejections.entry(p.analysis.reason.clone().unwrap_or_default()).or_insert(0) += 1;
    }
    let parabolic = accepted.iter().filter(|p| p.analysis.is_parabolic()).count();
    Summary {
        total_points: points.len(),
        accepted_points: accepted.len(),
        no_accepted_points: accepted.is_empty(),
        parabolic_fraction: (!accepted.is_empty()).then(|| parabolic as f64 / accepted.len() as f64),
        max_residuals,
        rejections,
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn verdict(name: &str, value: VerdictValue, note: Option<String>, evidence: Vec<Evidence>) -> Verdict {
    Verdict { name: name.into(), value, note, evidence }
}

/// Largest value and where it occurs.
fn argmax<'a>(rows: impl Iterator<Item = (&'a [f64], f64)>) -> Option<(Vec<f64>, f64)> {
    rows.fold(None, |best: Option<(Vec<f64>, f64)>, (p, v)| match best {
        Some((_, b)) if b >= v => best,
        _ => Some((p.to_vec(), v)),
    })
}

fn argmin<'a>(rows: impl Iterator<Item = (&'a [f64], f64)>) -> Option<(Vec<f64>, f64)> {
    argmax(rows.map(|(p, v)| (p, -v))).map(|(p, v)| (p, -v))
}

/// Fraction of `rows` whose value passes `ok`, with the worst row as evidence.
fn fraction_verdict(
    name: &str,
    quantity: &str,
    rows: &[(&[f64], f64)],
    threshold: f64,
) -> Verdict {
    if rows.is_empty() {
        return verdict(name, VerdictValue::Inconclusive, Some("no points carry this quantity".into()), vec![]);
    }
    let pass = rows.iter().filter(|(_, v)| *v <= threshold).count() as f64 / rows.len() as f64;
    let mut evidence = vec![Evidence::new(format!("fraction with {quantity} ≤ threshold"), pass, Some(PASS_FRACTION))];
    if let Some((p, v)) = argmax(rows.iter().copied()) {
        evidence.push(Evidence::new(format!("max {quantity}"), v, Some(threshold)).at(&p));
    }
    verdict(name, (pass >= PASS_FRACTION).into(), None, evidence)
}

/// Dichotomy verdict: true when the residual vanishes at enough points,
/// false when it is clearly nonzero somewhere and does not, otherwise
/// inconclusive.
fn detector_verdict(name: &str, quantity: &str, rows: &[(&[f64], f64)], tol: &Tolerances) -> Verdict {
    if rows.is_empty() {
        return verdict(name, VerdictValue::Inconclusive, Some("no parabolic points".into()), vec![]);
    }
    let vanishing = rows.iter().filter(|(_, v)| tol.detect(*v) == Detection::Vanishing).count() as f64 / rows.len() as f64;
    let nonzero = rows.iter().any(|(_, v)| tol.detect(*v) == Detection::Nonvanishing);
    let value = if vanishing >= PASS_FRACTION {
        VerdictValue::True
    } else if nonzero {
        VerdictValue::False
    } else {
        VerdictValue::Inconclusive
    };
    let mut evidence = vec![Evidence::new(format!("fraction with {quantity} vanishing"), vanishing, Some(PASS_FRACTION))];
    if let Some((p, v)) = argmax(rows.iter().copied()) {
        evidence.push(Evidence::new(format!("max {quantity}"), v, Some(tol.detector)).at(&p));
    }
    if let Some((p, v)) = argmin(rows.iter().copied()) {
        evidence.push(Evidence::new(format!("min {quantity}"), v, Some(tol.identity_pass)).at(&p));
    }
    verdict(name, value, None, evidence)
}

/// Verdicts on an analyzed grid. Charts of rank other than two get a
/// single out-of-scope verdict.
fn grid_verdicts(points: &[PointRow], tol: &Tolerances) -> Vec<Verdict> {
    let accepted: Vec<&PointRow> = points.iter().filter(|p| p.analysis.accepted()).collect();
    if accepted.is_empty() {
        return vec![verdict(
            "parabolic",
            VerdictValue::Inconclusive,
            Some("no accepted points".into()),
            vec![Evidence::new("accepted points", 0.0, None)],
        )];
    }
    let mut ranks: BTreeMap<usize, usize> = BTreeMap::new();
    for p in &accepted {
        if let Some(r) = p.analysis.rank {
            *ranks.entry(r).or_insert(0) += 1;
        }
    }
    let rank2 = ranks.get(&2).copied().unwrap_or(0);
    if rank2 == 0 {
        let (r, c) = ranks.iter().max_by_key(|(_, c)| **c).map(|(r, c)| (*r, *c)).unwrap_or((0, 0));
        return vec![verdict(
            "rank",
            VerdictValue::OutOfScope,
            Some(format!("rank {r}, out of scope of rank-2 analysis")),
            vec![Evidence::new(format!("accepted points of rank {r}"), c as f64, None)],
        )];
    }
    let frac = accepted.iter().filter(|p| p.analysis.is_parabolic()).count() as f64 / accepted.len() as f64;
    let mut out = vec![verdict(
        "parabolic",
        (frac >= PASS_FRACTION).into(),
        None,
        vec![
            Evidence::new("parabolic fraction of accepted points", frac, Some(PASS_FRACTION)),
            Evidence::new("accepted points", accepted.len() as f64, None),
        ],
    )];
    let para: Vec<&PointRow> = accepted.iter().copied().filter(|p| p.analysis.is_parabolic()).collect();
    let col = |f: &dyn Fn(&PointRow) -> Option<f64>| -> Vec<(&[f64], f64)> {
        para.iter().filter_map(|p| f(p).map(|v| (p.analysis.point.as_slice(), v))).collect()
    };
    out.push(detector_verdict("ruled", "ruled_residual", &col(&|p| p.analysis.ruled_residual), tol));
    out.push(detector_verdict(
        "surface_like",
        "surface_like_residual",
        &col(&|p| p.analysis.surface_like_residual),
        tol,
    ));
    let fundamental: Vec<(&[f64], f64)> = accepted
        .iter()
        .filter_map(|p| {
            let a = &p.analysis;
            Some((a.point.as_slice(), a.gauss?.max(a.codazzi?).max(a.ricci?)))
        })
        .collect();
    out.push(fraction_verdict("fundamental_equations", "Gauss/Codazzi/Ricci residual", &fundamental, FUNDAMENTAL_PASS));
    out.push(fraction_verdict("splitting_pattern", "off-pattern residual", &col(&|p| p.analysis.off_pattern), SPLITTING_PASS));
    out.push(fraction_verdict(
        "codazzi_identities",
        "identity residual",
        &col(&|p| Some(p.analysis.r_first?.max(p.analysis.r_second?).max(p.analysis.r_igual?))),
        tol.identity_pass,
    ));
    out
}

fn check_column<'a>(points: &'a [PointRow], key: &str) -> Vec<(&'a [f64], f64)> {
    points
        .iter()
        .filter(|p| p.analysis.accepted())
        .filter_map(|p| p.checks.get(key).map(|v| (p.analysis.point.as_slice(), *v)))
        .collect()
}

fn comparison_verdicts(k: usize, c: &Comparison) -> Vec<Verdict> {
    let mut iso = vec![Evidence::new("max metric difference", c.max_metric_diff, Some(c.iso_tol))];
    if let Some(r) = c.rows.iter().max_by(|a, b| a.metric_diff.total_cmp(&b.metric_diff)) {
        iso[0].point = Some(r.point.clone());
    }
    let mut cong = iso.clone();
    if let Some(d) = c.max_invariant_diff {
        let mut e = Evidence::new("max congruence-invariant difference", d, Some(c.congruence_tol));
        e.point = c
            .rows
            .iter()
            .filter(|r| r.invariant_diff.is_some())
            .max_by(|a, b| a.invariant_diff.unwrap_or(0.0).total_cmp(&b.invariant_diff.unwrap_or(0.0)))
            .map(|r| r.point.clone());
        cong.push(e);
    }
    cong.push(Evidence::new("points with invariants on both charts", c.comparable_points as f64, None));
    let note = if c.congruent {
        Some(CONGRUENCE_CAVEAT.to_string())
    } else if !c.isometric {
        Some("not isometric".into())
    } else {
        Some("an invariant distinguishes the pair".into())
    };
    vec![
        verdict(&format!("isometric_{k}"), c.isometric.into(), None, iso),
        verdict(&format!("congruent_{k}"), c.congruent.into(), note, cong),
    ]
}

struct Outcome {
    points: Vec<PointRow>,
    surface: Option<crate::constructors::SurfaceReport>,
    comparisons: Vec<Comparison>,
    reconstruction: Option<ReconstructionSummary>,
    verdicts: Vec<Verdict>,
}

impl Outcome {
    fn grid(points: Vec<PointRow>, tol: &Tolerances) -> Self {
        let verdicts = grid_verdicts(&points, tol);
        Outcome { points, surface: None, comparisons: vec![], reconstruction: None, verdicts }
    }
}

fn run_generate_ruled(frame: &super::config::RuledSource, grid: &GridSpec, seed: u64, tol: &Tolerances) -> Result<Outcome, HarnessError> {
    let input = frame.resolve(seed)?;
    let (path, chart) = build_ruled(&input)?;
    let mut points = analyze_grid(&chart, grid, tol)?;
    points.par_iter_mut().filter(|p| p.analysis.accepted()).for_each(|p| {
        if let Ok(t) = ruling_tangency_residual(&chart, &input, &path, &p.analysis.point) {
            p.checks.insert("tangency".into(), t);
        }
    });
    let mut out = Outcome::grid(points, tol);
    let expected = input.n - 2;
    let nu: Vec<(&[f64], f64)> = out
        .points
        .iter()
        .filter(|p| p.analysis.accepted())
        .map(|p| (p.analysis.point.as_slice(), if p.analysis.nu == Some(expected) { 0.0 } else { 1.0 }))
        .collect();
    if out.verdicts.iter().any(|v| v.name == "parabolic") {
        out.verdicts.push(fraction_verdict("nullity_index", "nullity mismatch", &nu, 0.0));
        out.verdicts.push(fraction_verdict("ruling_tangency", "tangency", &check_column(&out.points, "tangency"), TANGENCY_PASS));
    }
    Ok(out)
}

fn run_generate_polar(input: &crate::constructors::PolarSurfaceInput, grid: &GridSpec, tol: &Tolerances) -> Result<Outcome, HarnessError> {
    let map = section_map(input, tol)?;
    let surface = map.surface_report().clone();
    let psi = polar_extension(map, input.half_width)?;
    let mut points = analyze_grid(&psi.chart, grid, tol)?;
    points.par_iter_mut().filter(|p| p.analysis.accepted()).for_each(|p| {
        if let Ok(t) = psi.tangent_space_residual(&p.analysis.point) {
            p.checks.insert("tangent_space".into(), t);
        }
        if let Ok(t) = psi.nullity_residual(&p.analysis.point, tol) {
            p.checks.insert("nullity_vs_lambda".into(), t);
        }
    });
    let mut out = Outcome::grid(points, tol);
    if out.verdicts.iter().any(|v| v.name == "parabolic") {
        out.verdicts.push(fraction_verdict(
            "polar_tangent_space",
            "tangent-space residual",
            &check_column(&out.points, "tangent_space"),
            POLAR_TANGENT_PASS,
        ));
        out.verdicts.push(fraction_verdict(
            "nullity_equals_lambda",
            "nullity residual",
            &check_column(&out.points, "nullity_vs_lambda"),
            POLAR_TANGENT_PASS,
        ));
        let g_ruled = match surface.ruled {
            Detection::Vanishing => VerdictValue::True,
            Detection::Nonvanishing => VerdictValue::False,
            Detection::Inconclusive => VerdictValue::Inconclusive,
        };
        out.verdicts.push(verdict(
            "surface_ruled",
            g_ruled,
            None,
            vec![Evidence::new("max ruled residual of the surface", surface.ruled_residual, Some(tol.detector))],
        ));
        let psi_ruled = out.verdict_value("ruled");
        let consistent = match (psi_ruled, g_ruled) {
            (Some(a), b) if a != VerdictValue::Inconclusive && b != VerdictValue::Inconclusive => (a == b).into(),
            _ => VerdictValue::Inconclusive,
        };
        out.verdicts.push(verdict(
            "ruled_iff_surface_ruled",
            consistent,
            None,
            vec![Evidence::new("max ruled residual of the surface", surface.ruled_residual, Some(tol.detector))],
        ));
    }
    out.surface = Some(surface);
    Ok(out)
}

impl Outcome {
    fn verdict_value(&self, name: &str) -> Option<VerdictValue> {
        self.verdicts.iter().find(|v| v.name == name).map(|v| v.value)
    }
}

fn run_reconstruct(
    input: &crate::constructors::PolarSurfaceInput,
    options: &ReconstructOptions,
    seed_from: SeedSource,
    convergence: bool,
    tol: &Tolerances,
) -> Result<Outcome, HarnessError> {
    let map = section_map(input, tol)?;
    let g = map.surface().clone();
    let psi = polar_extension(map, input.half_width)?;
    let seed = match seed_from {
        SeedSource::Reference => PolarSeed::Reference(g),
        SeedSource::Canonical => PolarSeed::Canonical,
    };
    let coarse = construct_polar(&psi.chart, options, &seed, tol)?;
    let fine = if convergence { Some(construct_polar(&psi.chart, &options.refined(), &seed, tol)?) } else { None };

    // f itself on the section nodes
    let [a0, a1] = options.axes;
    let nodes: Vec<Vec<f64>> = (0..options.counts[0])
        .flat_map(|i| (0..options.counts[1]).map(move |j| (i, j)))
        .map(|(i, j)| {
            let t = |k: usize, c: usize| {
                let n = options.counts[k];
                options.lower[k] + (options.upper[k] - options.lower[k]) * c as f64 / (n - 1) as f64
            };
            let mut p = options.slice.clone();
            p[a0] = t(0, i);
            p[a1] = t(1, j);
            p
        })
        .collect();
    let points: Vec<PointRow> = nodes
        .par_iter()
        .map(|p| PointRow { analysis: analyze_point(&psi.chart, p, tol), checks: BTreeMap::new() })
        .collect();
    let mut out = Outcome::grid(points, tol);
    out.verdicts.retain(|v| v.name == "parabolic" || v.name == "rank");
    if let Some(v) = out.verdicts.iter_mut().find(|v| v.name == "parabolic") {
        v.name = "section_parabolic".into();
    }

    let summary = ReconstructionSummary {
        u_axis: coarse.state.u_axis,
        v_axis: coarse.state.v_axis,
        counts: options.counts,
        curl_residual: coarse.curl_residual,
        path_discrepancy: coarse.path_discrepancy,
        tangent_residual: coarse.tangent_residual,
        first_normal_ratio: finite(coarse.first_normal_ratio),
        asymptotic_ratio: coarse.asymptotic_ratio,
        min_theta: coarse.min_theta,
        refined_curl_residual: fine.as_ref().map(|f| f.curl_residual),
        refined_tangent_residual: fine.as_ref().map(|f| f.tangent_residual),
        curl_ratio: fine.as_ref().and_then(|f| finite(coarse.curl_residual / f.curl_residual)),
        tangent_ratio: fine.as_ref().and_then(|f| finite(coarse.tangent_residual / f.tangent_residual)),
    };
    let best = fine.as_ref().unwrap_or(&coarse);
    out.verdicts.push(verdict(
        "integrable",
        VerdictValue::True,
        None,
        vec![Evidence::new("curl residual", coarse.curl_residual, Some(options.curl_budget))],
    ));
    out.verdicts.push(verdict(
        "polar_tangent_space",
        (best.tangent_residual <= RECONSTRUCTED_TANGENT_PASS).into(),
        None,
        vec![Evidence::new("tangent residual", best.tangent_residual, Some(RECONSTRUCTED_TANGENT_PASS))],
    ));
    out.verdicts.push(verdict(
        "reconstructed_parabolic",
        (finite(best.first_normal_ratio).is_some_and(|r| r >= FD_FIRST_NORMAL_FLOOR)
            && best.asymptotic_ratio <= FD_ASYMPTOTIC_CEIL)
            .into(),
        Some("finite-difference estimate".into()),
        vec![
            Evidence::new(
                "first normal singular value ratio",
                finite(best.first_normal_ratio).unwrap_or(0.0),
                Some(FD_FIRST_NORMAL_FLOOR),
            ),
            Evidence::new("asymptotic ratio", best.asymptotic_ratio, Some(FD_ASYMPTOTIC_CEIL)),
        ],
    ));
    if let Some(r) = summary.curl_ratio {
        out.verdicts.push(verdict(
            "second_order_convergence",
            (r >= CONVERGENCE_RATIO).into(),
            None,
            vec![
                Evidence::new("curl ratio under 2x refinement", r, Some(CONVERGENCE_RATIO)),
                Evidence::new("refined curl residual", summary.refined_curl_residual.unwrap_or_default(), None),
            ],
        ));
    }
    out.reconstruction = Some(summary);
    Ok(out)
}

fn run_compare(pairs: Vec<(ImmersionChart, ImmersionChart)>, grid: &GridSpec, tol: &Tolerances) -> Result<Outcome, HarnessError> {
    let reference = &pairs[0].0;
    let points = analyze_grid(reference, grid, tol)?;
    let shared = grid.points(reference.domain())?;
    let mut out = Outcome::grid(points, tol);
    for (k, (a, b)) in pairs.iter().enumerate() {
        let c = compare_immersions(a, b, &shared, tol)?;
        out.verdicts.extend(comparison_verdicts(k, &c));
        out.comparisons.push(c);
    }
    Ok(out)
}

/// Runs one scenario. Errors are hard failures; negative verdicts are not.
pub fn run_scenario(config: &ScenarioConfig, opts: RunOptions) -> Result<Report, HarnessError> {
    if !(opts.tol_scale.is_finite() && opts.tol_scale > 0.0) {
        return Err(HarnessError::Config(format!("tolerance scale {} must be positive", opts.tol_scale)));
    }
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    let clock = Instant::now();
    let seed = opts.seed.or(config.seed).unwrap_or(0);
    let tol = config.tolerances.scaled(opts.tol_scale);
    let out = match &config.scenario {
        Scenario::GenerateRuled { frame, grid } => run_generate_ruled(frame, grid, seed, &tol)?,
        Scenario::Deform { frame, thetas, grid } => {
            if thetas.is_empty() {
                return Err(HarnessError::Config("deform needs at least one theta".into()));
            }
            let input = frame.resolve(seed)?;
            let (_, original) = build_ruled(&input)?;
            let pairs = thetas
                .iter()
                .map(|t| Ok((original.clone(), build_ruled(&gauge_deformation(&input, t)?)?.1)))
                .collect::<Result<Vec<_>, HarnessError>>()?;
            run_compare(pairs, grid, &tol)?
        }
        Scenario::GeneratePolar { input, grid } => run_generate_polar(input, grid, &tol)?,
        Scenario::ReconstructPolar { input, options, seed_from, convergence } => {
            run_reconstruct(input, options, *seed_from, *convergence, &tol)?
        }
        Scenario::Analyze { chart, grid } => Outcome::grid(analyze_grid(&chart.build(seed, &tol)?, grid, &tol)?, &tol),
        Scenario::Compare { a, b, rigid_motion_b, grid } => {
            let ca = a.build(seed, &tol)?;
            let mut cb = b.build(seed, &tol)?;
            if let Some(s) = rigid_motion_b {
                cb = cb.with_rigid_motion(&RigidMotion::random(cb.ambient_dim(), *s))?;
            }
            run_compare(vec![(ca, cb)], grid, &tol)?
        }
    };
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: config.clone(),
        seed,
        tolerances: tol,
        summary: summarize(&out.points),
        points: out.points,
        surface: out.surface,
        comparisons: out.comparisons,
        reconstruction: out.reconstruction,
        verdicts: out.verdicts,
        limitation: RIGIDITY_LIMITATION.to_string(),
        timing: Some(Timing { started_unix_ms: started, elapsed_ms: clock.elapsed().as_secs_f64() * 1e3 }),
    })
}
