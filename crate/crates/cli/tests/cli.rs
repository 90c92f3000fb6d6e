use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lattice_uc::io::{boundary_to_json, cube_to_json};
use lattice_uc::lattice::{BoundaryData, GridBox, LatticeSpec};
use lattice_uc::polyext::{Rational, RationalGrid};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lattice-uc"));
    c.env_remove("LATTICE_UC_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write(path: &Path, text: &str) -> String {
    fs::write(path, text).unwrap();
    path.display().to_string()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["solve", "--bogus"])), 1);
    assert_eq!(code(&run(&["solve", "--law", "bogus"])), 1);
    assert_eq!(code(&run(&["three-cubes", "--r", "1/100", "--R", "1/50"])), 1);
    assert_eq!(code(&run(&["three-cubes", "--r", "one"])), 1);
    assert_eq!(code(&run(&["extend", "--padding", "mirror"])), 1);
    assert_eq!(code(&run(&["counterexample", "--M", "4", "--N", "2"])), 1);
}

#[test]
fn solve_from_file() {
    let spec = LatticeSpec::new(2, 4).unwrap();
    let g = BoundaryData::from_fn(spec.unit_cube(), |p| (p[0] * p[1]) as f64 / 16.0);
    let path = write(&scratch("boundary.json"), &boundary_to_json(&spec, &g));
    let o = run(&["solve", "--input", &path]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["config"]["N"], 4);
    assert_eq!(r["summary"]["datasets"], 1);
    assert!(r["summary"]["max_relative_discrepancy"].as_f64().unwrap() < 1e-12);

    let bad = write(&scratch("boundary-bad.json"), "{\"dim\": 2, \"mesh\": 4, \"values\": []}");
    assert_eq!(code(&run(&["solve", "--input", &bad])), 1);
    assert_eq!(code(&run(&["solve", "--input", "/nonexistent/boundary.json"])), 1);
}

#[test]
fn extend_exit_codes() {
    let bx = GridBox::cube(2, 1);
    let linear = RationalGrid::from_fn(bx.clone(), |p| Rational::from_integer((p[0] + 2 * p[1]).into()));
    let good = write(&scratch("cube.json"), &cube_to_json(&linear).unwrap());
    let o = run(&["extend", "--input", &good]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["rows"][0]["polynomial"], serde_json::json!({"0,1": "2/1", "1,0": "1/1"}));

    let bumped = RationalGrid::from_fn(bx, |p| Rational::from_integer(((p[0] == 0 && p[1] == 0) as i64).into()));
    let bad = write(&scratch("cube-bad.json"), &cube_to_json(&bumped).unwrap());
    let o = run(&["extend", "--input", &bad]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[0, 0]"));
    let garbage = write(&scratch("cube-garbage.json"), "{\"dim\": 2");
    assert_eq!(code(&run(&["extend", "--input", &garbage])), 2);

    assert_eq!(code(&run(&["extend", "--bit-cap", "10"])), 4);
}

#[test]
fn three_cubes_validation_failure() {
    let o = run(&["three-cubes", "--samples", "3", "--A", "1e-12"]);
    assert_eq!(code(&o), 3);
    let r = json(&o);
    assert_eq!(r["summary"]["all_satisfied"], false);
    assert!(r["summary"]["calibration"].is_null());
}

#[test]
fn config_file_and_precedence() {
    let cfg = write(&scratch("config.toml"), "N = 6\nsamples = 2\nseed = 9\nlaw = \"low-frequency\"\n");
    let o = run(&["--config", &cfg, "solve"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["config"]["N"], 6);
    assert_eq!(r["config"]["samples"], 2);
    assert_eq!(r["config"]["law"], "low_frequency");
    // flags win over the file
    let o = run(&["--config", &cfg, "solve", "--N", "4"]);
    assert_eq!(json(&o)["config"]["N"], 4);
    // the environment variable names the same file
    let o = bin().env("LATTICE_UC_CONFIG", &cfg).args(["solve"]).output().unwrap();
    assert_eq!(json(&o)["config"]["seed"], 9);

    let unknown = write(&scratch("config-bad.toml"), "samplez = 3\n");
    assert_eq!(code(&run(&["--config", &unknown, "solve"])), 1);
    assert_eq!(code(&run(&["--config", "/nonexistent.toml", "solve"])), 1);
}

#[test]
fn output_options() {
    let out = scratch("report.json");
    let o = run(&["nodes-check", "--m-max", "3", "--out", &out.display().to_string()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(&out).unwrap();
    let r: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["command"], "nodes-check");
    assert!(r.get("timing").is_none());

    let o = run(&["--timing", "kernel-check", "--N", "2"]);
    assert!(json(&o)["timing"].as_f64().unwrap() >= 0.0);

    let o = run(&["--format", "csv", "counterexample"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("K,max"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn kernel_check_report() {
    let o = run(&["kernel-check", "--n", "3", "--N", "2"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["rows"].as_array().unwrap().len(), 6 * 9);
    assert_eq!(r["summary"]["eigenvalue_bound_violations"], 0);
}

#[test]
fn command_examples() {
    let o = run(&["solve", "--N", "8", "--law", "constant"]);
    assert_eq!(code(&o), 0);
    assert!(json(&o)["summary"]["max_discrepancy"].as_f64().unwrap() <= 1e-12);

    let o = run(&["three-cubes", "--samples", "0", "--calibrate", "2"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert!(r["rows"].as_array().unwrap().is_empty());
    assert_eq!(r["config"]["r_grid"], 1.0 / 512.0);
    assert_eq!(code(&run(&["three-cubes", "--r", "1/256", "--R", "1/256"])), 1);

    let constant = RationalGrid::from_fn(GridBox::cube(2, 2), |_| Rational::new(3.into(), 7.into()));
    let path = write(&scratch("cube-constant.json"), &cube_to_json(&constant).unwrap());
    let o = run(&["extend", "--input", &path]);
    assert_eq!(json(&o)["rows"][0]["degree"], 0);

    let o = run(&["counterexample", "--M", "1", "--N", "4"]);
    assert_eq!(json(&o)["summary"]["rate_above_one"], true);
    assert_eq!(code(&run(&["counterexample", "--M", "4", "--N", "4"])), 1);
}
