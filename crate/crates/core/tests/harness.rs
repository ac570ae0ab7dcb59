use std::process::Command;

use rank2geom::harness::{
    emit_report, points_csv, run_scenario, OutputFormat, Report, RunOptions, ScenarioConfig, VerdictValue,
    CONGRUENCE_CAVEAT, RIGIDITY_LIMITATION,
};

const BIN: &str = env!("CARGO_BIN_EXE_rank2geom");

fn config(text: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml(text).unwrap()
}

fn run(text: &str) -> Report {
    run_scenario(&config(text), RunOptions::default()).unwrap()
}

const RULED: &str = r#"
name = "ruled"
seed = 4
[scenario]
kind = "generate_ruled"
frame = { from = "random", n = 3 }
grid = { counts = [8, 4, 3] }
"#;

#[test]
fn generate_ruled_verdicts() {
    let r = run(RULED);
    assert_eq!(r.verdict("parabolic").unwrap().value, VerdictValue::True);
    assert_eq!(r.verdict("ruled").unwrap().value, VerdictValue::True);
    assert_eq!(r.verdict("ruling_tangency").unwrap().value, VerdictValue::True);
    assert_eq!(r.limitation, RIGIDITY_LIMITATION);
    for v in &r.verdicts {
        assert!(!v.evidence.is_empty(), "verdict {} without evidence", v.name);
    }
}

#[test]
fn plane_is_out_of_scope() {
    let r = run(r#"
name = "plane"
[scenario]
kind = "analyze"
chart = { chart = "builtin", name = "plane" }
grid = { counts = [3, 3] }
"#);
    let v = r.verdict("rank").unwrap();
    assert_eq!(v.value, VerdictValue::OutOfScope);
    assert_eq!(v.note.as_deref(), Some("rank 0, out of scope of rank-2 analysis"));
    assert_eq!(r.verdicts.len(), 1);
}

#[test]
fn rigid_copy_compares_equal() {
    let r = run(r#"
name = "rigid"
[scenario]
kind = "compare"
a = { chart = "builtin", name = "graph_product" }
b = { chart = "builtin", name = "graph_product" }
rigid_motion_b = 12
grid = { counts = [3, 3, 3] }
"#);
    assert_eq!(r.verdict("isometric_0").unwrap().value, VerdictValue::True);
    let c = r.verdict("congruent_0").unwrap();
    assert_eq!(c.value, VerdictValue::True);
    assert_eq!(c.note.as_deref(), Some(CONGRUENCE_CAVEAT));
}

#[test]
fn gauge_deformation_is_isometric_not_congruent() {
    let r = run(r#"
name = "deform"
seed = 11
[scenario]
kind = "deform"
frame = { from = "random", n = 3 }
grid = { counts = [8, 4, 4] }
thetas = [{ basis = "trig", coeffs = [[0.0, 0.0], [0.0, 0.3]] }, { basis = "poly", coeffs = [0.5] }]
"#);
    assert_eq!(r.verdict("isometric_0").unwrap().value, VerdictValue::True);
    assert_eq!(r.verdict("congruent_0").unwrap().value, VerdictValue::False);
    assert_eq!(r.verdict("congruent_1").unwrap().value, VerdictValue::True);
    assert!(r.comparisons[0].max_metric_diff < 1e-8);
}

#[test]
fn different_polar_fixtures_are_not_isometric() {
    let r = run(r#"
name = "polars"
[scenario]
kind = "compare"
grid = { counts = [3, 3, 3], shrink = 0.8 }
[scenario.a]
chart = "polar"
input = { surface = { family = "heat", n = 3 }, phi = [[1.0, 0.0, 1.0]] }
[scenario.b]
chart = "polar"
input = { surface = { family = "ruled_graph", n = 3 }, phi = [[1.0, 2.0, 1.0]] }
"#);
    assert_eq!(r.verdict("isometric_0").unwrap().value, VerdictValue::False);
    assert_eq!(r.verdict("congruent_0").unwrap().value, VerdictValue::False);
}

#[test]
fn polar_scenario_reports_surface_and_dichotomy() {
    let r = run(r#"
name = "polar"
[scenario]
kind = "generate_polar"
grid = { counts = [4, 4, 3] }
input = { surface = { family = "heat", n = 3 }, phi = [[1.0, 0.0, 1.0]], gamma0 = [[[0.1, 0.0, 0.0]]] }
"#);
    assert_eq!(r.verdict("parabolic").unwrap().value, VerdictValue::True);
    assert_eq!(r.verdict("ruled").unwrap().value, VerdictValue::False);
    assert_eq!(r.verdict("surface_ruled").unwrap().value, VerdictValue::False);
    assert_eq!(r.verdict("ruled_iff_surface_ruled").unwrap().value, VerdictValue::True);
    assert_eq!(r.verdict("polar_tangent_space").unwrap().value, VerdictValue::True);
    assert!(r.surface.is_some());
}

#[test]
fn misspelled_keys_are_rejected() {
    for bad in [
        RULED.replace("seed = 4", "sead = 4"),
        RULED.replace("grid = {", "gird = {"),
        RULED.replace("n = 3", "nn = 3"),
        RULED.replace("counts", "count"),
        RULED.replace("generate_ruled", "generate_rulled"),
    ] {
        assert!(ScenarioConfig::from_toml(&bad).is_err(), "accepted:\n{bad}");
    }
    let missing = RULED.replace("grid = { counts = [8, 4, 3] }", "");
    assert!(ScenarioConfig::from_toml(&missing).is_err());
}

#[test]
fn toml_and_json_agree() {
    let c = config(RULED);
    let json = serde_json::to_string(&c).unwrap();
    assert_eq!(ScenarioConfig::from_json(&json).unwrap(), c);
}

#[test]
fn json_round_trip_and_determinism() {
    let a = run(RULED);
    let b = run(RULED);
    let text = a.to_json().unwrap();
    assert_eq!(Report::from_json(&text).unwrap(), a);
    assert_eq!(a.masked().to_json().unwrap(), b.masked().to_json().unwrap());
    let c = run_scenario(&config(RULED), RunOptions { seed: Some(5), tol_scale: 1.0 }).unwrap();
    assert_eq!(c.seed, 5);
    assert_ne!(c.masked().points, a.masked().points);
}

#[test]
fn tolerance_scale_is_applied() {
    let r = run_scenario(&config(RULED), RunOptions { seed: None, tol_scale: 10.0 }).unwrap();
    assert_eq!(r.tolerances.detector, 1e-2);
    assert!(run_scenario(&config(RULED), RunOptions { seed: None, tol_scale: -1.0 }).is_err());
}

#[test]
fn empty_point_set_is_flagged() {
    // (x, x, 0, 0) is singular everywhere
    let r = run(r#"
name = "degenerate"
[scenario]
kind = "analyze"
grid = { counts = [3, 3] }
[scenario.chart]
chart = "polynomial"
dim = 2
coordinates = [[[1.0, 1.0, 0.0]], [[1.0, 1.0, 0.0]], [], []]
domain = { lower = [-1.0, -1.0], upper = [1.0, 1.0] }
"#);
    assert!(r.summary.no_accepted_points);
    assert_eq!(r.summary.accepted_points, 0);
    assert_eq!(r.summary.total_points, 9);
    assert_eq!(r.verdict("parabolic").unwrap().value, VerdictValue::Inconclusive);
    let csv = points_csv(&r).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert_eq!(Report::from_json(&r.to_json().unwrap()).unwrap(), r);
}

#[test]
fn csv_rows_match_accepted_points() {
    let r = run(&RULED.replace("[8, 4, 3]", "[20, 20, 5]"));
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&r, dir.path(), OutputFormat::Both).unwrap();
    assert_eq!(files.len(), 2);
    let mut reader = csv::Reader::from_path(dir.path().join("ruled.csv")).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[0], "x0");
    assert!(header.iter().any(|h| h == "tangency"));
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), r.summary.accepted_points);
    assert_eq!(rows.len(), 2000);
    let v: f64 = rows[0][0].parse().unwrap();
    assert!(rows[0][0].contains('.') && v.is_finite());
}

#[test]
fn reconstruct_scenario_verdicts() {
    let r = run(r#"
name = "reconstruct"
[scenario]
kind = "reconstruct_polar"
input = { surface = { family = "ruled_graph", n = 3 }, phi = [[1.0, 2.0, 1.0]], gamma0 = [[[0.1, 0.0, 0.0]]] }
options = { axes = [0, 1], slice = [0.0, 0.0, 0.0], lower = [-0.2, -0.2], upper = [0.2, 0.2], counts = [9, 9], curl_budget = 0.1 }
"#);
    let rec = r.reconstruction.as_ref().unwrap();
    assert!(rec.curl_ratio.unwrap() >= 3.0);
    assert_eq!(r.verdict("section_parabolic").unwrap().value, VerdictValue::True);
    assert_eq!(r.verdict("second_order_convergence").unwrap().value, VerdictValue::True);
    assert_eq!(r.summary.accepted_points, 81);
}

fn write_config(dir: &std::path::Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn cli_writes_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "ruled.toml", RULED);
    let status = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "both", "--seed", "4"])
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(out.join("ruled.json").exists() && out.join("ruled.csv").exists());

    // a negative verdict is not an error
    let plane = write_config(
        dir.path(),
        "plane.json",
        r#"{"name": "plane", "scenario": {"kind": "analyze", "chart": {"chart": "builtin", "name": "plane"}, "grid": {"counts": [3, 3]}}}"#,
    );
    let env_out = dir.path().join("env_out");
    let status = Command::new(BIN)
        .args(["run", plane.to_str().unwrap()])
        .env("RANK2GEOM_OUT_DIR", &env_out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(env_out.join("plane.json").exists());

    let bad = write_config(dir.path(), "bad.toml", &RULED.replace("seed", "sed"));
    let status = Command::new(BIN).args(["run", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap().status;
    assert!(!status.success());

    // generator rejection: φ violates the asymptotic condition
    let rejected = write_config(
        dir.path(),
        "rejected.toml",
        r#"
name = "rejected"
[scenario]
kind = "generate_polar"
grid = { counts = [3, 3, 3] }
input = { surface = { family = "heat", n = 3 }, phi = [[1.0, 0.0, 2.0]] }
"#,
    );
    let status = Command::new(BIN).args(["run", rejected.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap().status;
    assert!(!status.success());
}

#[test]
fn cli_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ruled.toml", RULED);
    let mut texts = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = Command::new(BIN).args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap().status;
        assert!(status.success());
        let r = Report::from_json(&std::fs::read_to_string(out.join("ruled.json")).unwrap()).unwrap();
        texts.push(r.masked().to_json().unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}
