//! Runs the `partialk` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_partialk"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("partialk-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Simulates a small scenario into `dir` and returns the CSV path.
fn simulate(dir: &Path, scenario: &str) -> String {
    let path = dir.join(format!("{scenario}.csv"));
    let out = run(&[
        "simulate", "--scenario", scenario, "--seed", "7", "--window", "0,120,0,120",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_is_deterministic_and_records_parameters() {
    let a = run(&["simulate", "--scenario", "biv-solitary", "--seed", "3", "--window", "0,100,0,100"]);
    let b = run(&["simulate", "--scenario", "biv-solitary", "--seed", "3", "--window", "0,100,0,100"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("p_x = 0.1"), "{}", &text[..text.len().min(400)]);
    assert!(text.contains("seed: 3"));
}

#[test]
fn simulate_set_overrides_a_parameter() {
    let out = run(&["simulate", "--scenario", "biv-independent", "--set", "lambda_y=0.002", "--window", "0,100,0,100"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("lambda_y = 0.002"));
    let bad = run(&["simulate", "--scenario", "biv-independent", "--set", "nonsense=1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn unknown_scenario_lists_the_valid_ids() {
    let out = run(&["simulate", "--scenario", "no-such-thing"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("biv-packs") && err.contains("cox-squared"), "{err}");
}

#[test]
fn plain_estimate_has_unit_debias_factor() {
    let dir = scratch("plain");
    let csv = simulate(&dir, "biv-independent");
    let report = dir.join("report.txt");
    let out = run(&[
        "estimate", "--pattern", &csv, "--targets", "X,Y", "--kmax", "0.5", "--radii", "0:10:11",
        "--report", report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 12, "{text}");
    assert!(text.starts_with("r,"));
    let report = fs::read_to_string(report).unwrap();
    assert!(report.contains("debias_factor = 1"), "{report}");
}

#[test]
fn partial_pcf_estimate_runs() {
    let dir = scratch("pcf");
    let csv = simulate(&dir, "tri-cooperative");
    let out = run(&[
        "estimate", "--pattern", &csv, "--targets", "X,Y", "--covariates", "Z", "--stat", "pcf",
        "--kmax", "0.5", "--radii", "1:10:10",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("debias_factor = 1.14"), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().skip(1).count(), 10);
}

#[test]
fn envelope_refuses_partial_statistics() {
    let dir = scratch("env-partial");
    let csv = simulate(&dir, "tri-independent");
    let out = run(&[
        "envelope", "--pattern", &csv, "--targets", "X,Y", "--covariates", "Z", "--nsim", "19", "--kmax", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn envelope_writes_band_columns() {
    let dir = scratch("env");
    let csv = simulate(&dir, "biv-independent");
    let out = run(&[
        "envelope", "--pattern", &csv, "--targets", "X,Y", "--nsim", "19", "--kmax", "0.5", "--radii", "1:8:8",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let header = text.lines().next().unwrap();
    assert!(header.contains("lo") && header.contains("hi"), "{header}");
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn oracle_check_agrees_and_reports_singular_models() {
    let out = run(&["oracle-check", "--model", "thomas", "--r", "2:12:6"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let err = stderr(&out);
    let worst: f64 = err.trim().rsplit("= ").next().unwrap().parse().unwrap();
    assert!(worst < 0.01, "{err}");

    let bad = run(&["oracle-check", "--model", "thomas", "--sigma", "1e-4", "--r", "1:5:5"]);
    assert_eq!(bad.status.code(), Some(4), "{}", stderr(&bad));
}

#[test]
fn kmax_diagnostic_prints_both_curves() {
    let dir = scratch("kmax");
    let csv = simulate(&dir, "biv-independent");
    let out = run(&["kmax-diagnostic", "--pattern", &csv, "--targets", "X,Y", "--kmax", "0.4", "--radii", "1:8:4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("r,value_kmax,value_2kmax,abs_change"));
    assert!(stderr(&out).contains("max change when doubled"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = scratch("config");
    let csv = simulate(&dir, "biv-independent");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "# settings\ntapers = 6\nkmax = 0.5\nradii = 0:10:6\n").unwrap();
    let report = dir.join("report.txt");
    let out = run(&[
        "estimate", "--pattern", &csv, "--targets", "X,Y", "--config", cfg.to_str().unwrap(), "--tapers", "9",
        "--report", report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 7);
    let report = fs::read_to_string(report).unwrap();
    assert!(report.contains("tapers = 9"), "{report}");
}

#[test]
fn bad_config_line_is_reported() {
    let dir = scratch("badconfig");
    let csv = simulate(&dir, "biv-independent");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "tapers = 8\n\nroute = sideways\n").unwrap();
    let out = run(&["estimate", "--pattern", &csv, "--targets", "X,Y", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn missing_pattern_file_is_a_usage_error() {
    let out = run(&["estimate", "--pattern", "/nonexistent/p.csv", "--targets", "X,Y"]);
    assert_eq!(out.status.code(), Some(2));
}
