use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coreadership::synth::{compare_with_truth, SynthTruth};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coreadership"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, users: usize, papers: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("synth_{users}_{seed}"));
    ok(&[
        "synth",
        "--users",
        &users.to_string(),
        "--papers",
        &papers.to_string(),
        "--seed",
        &seed.to_string(),
        "-o",
        p(&out),
    ]);
    out
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|r| r.unwrap().iter().map(str::to_owned).collect()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_writes_log_and_truth_that_roundtrip() {
    let dir = TempDir::new().unwrap();
    let s = synth(dir.path(), 300, 1000, 7);
    let log = fs::read_to_string(s.join("events.log")).unwrap();
    let truth: SynthTruth = serde_json::from_str(&fs::read_to_string(s.join("truth.json")).unwrap()).unwrap();
    assert!(compare_with_truth(&log, &truth).unwrap().ok());
    assert_eq!(json(&s.join("manifest.json"))["command"], "synth");
}

#[test]
fn synth_requires_users() {
    let dir = TempDir::new().unwrap();
    let out = run(&["synth", "-o", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--users"));
}

#[test]
fn synth_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["synth", "--users", "200", "--papers", "800", "--seed", "3", "-o", p(out)]);
    }
    assert_eq!(fs::read(a.join("events.log")).unwrap(), fs::read(b.join("events.log")).unwrap());
    assert_eq!(fs::read(a.join("truth.json")).unwrap(), fs::read(b.join("truth.json")).unwrap());
}

#[test]
fn synth_config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n_users": 50, "n_papers": 400, "noise_users": 5, "seed": 11}"#).unwrap();
    let out = dir.path().join("o");
    ok(&["synth", "--config", p(&cfg), "--noise-users", "9", "-o", p(&out)]);
    let truth: SynthTruth = serde_json::from_str(&fs::read_to_string(out.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth.users.len(), 59);
}

#[test]
fn analyze_writes_ranked_spectrum() {
    let dir = TempDir::new().unwrap();
    let s = synth(dir.path(), 500, 2000, 5);
    let a = dir.path().join("a");
    ok(&["analyze", "--log", p(&s.join("events.log")), "--ns", "200", "-o", p(&a)]);
    let rows = csv_rows(&a.join("eigenvalues.csv"));
    assert_eq!(rows.len(), 200);
    let values: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(rows[0][0], "1");
    assert!(values.iter().all(|&v| v <= values[0]));
    let summary = json(&a.join("summary.json"));
    assert_eq!(summary["n_s"], 200);
    assert_eq!(summary["epsilon1"].as_f64().unwrap(), values[0]);
    assert!(summary["r_statistic"].as_f64().unwrap() > 1.0);
    assert!(summary["checks_passed"].as_bool().unwrap());
    let density = csv_rows(&a.join("density.csv"));
    let integral: f64 = density
        .iter()
        .map(|r| (r[1].parse::<f64>().unwrap() - r[0].parse::<f64>().unwrap()) * r[2].parse::<f64>().unwrap())
        .sum();
    assert!((integral - 1.0).abs() < 1e-12);
    assert_eq!(csv_rows(&a.join("sample.csv")).len(), 200);
    assert_eq!(json(&a.join("manifest.json"))["command"], "analyze");
}

#[test]
fn analyze_ns2_reports_undefined_separation() {
    let dir = TempDir::new().unwrap();
    let s = synth(dir.path(), 100, 600, 1);
    let a = dir.path().join("a");
    let out = ok(&["analyze", "--log", p(&s.join("events.log")), "--ns", "2", "-o", p(&a)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("undefined for n_s < 3"));
    assert_eq!(csv_rows(&a.join("eigenvalues.csv")).len(), 2);
    let summary = json(&a.join("summary.json"));
    assert!(summary["r_statistic"].is_null());
    assert!(summary["r_statistic_error"].as_str().unwrap().contains("undefined for n_s < 3"));
}

#[test]
fn analyze_empty_log_fails_in_population() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("empty.log");
    fs::write(&log, "").unwrap();
    let out = run(&["analyze", "--log", p(&log), "--ns", "10", "-o", p(&dir.path().join("a"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("population"));
}

#[test]
fn sweep_fits_finite_alpha() {
    let dir = TempDir::new().unwrap();
    let s = synth(dir.path(), 2000, 5000, 7);
    let o = dir.path().join("sw");
    ok(&["sweep", "--log", p(&s.join("events.log")), "--sizes", "50,100,200,400", "-o", p(&o)]);
    let fit = json(&o.join("fit.json"));
    assert!(fit["alpha"].as_f64().unwrap().is_finite());
    let r2 = fit["r_squared"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&r2));
    let rows = csv_rows(&o.join("scaling.csv"));
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["50", "100", "200", "400"]);
}

#[test]
fn sweep_fit_hook_recovers_exact_exponent() {
    let dir = TempDir::new().unwrap();
    let pts = dir.path().join("pts.csv");
    let mut text = String::from("n_s,epsilon1\n");
    for n in [50.0f64, 100.0, 200.0, 400.0, 800.0, 1600.0] {
        text += &format!("{n},{}\n", 1.7 * n.powf(0.25));
    }
    fs::write(&pts, text).unwrap();
    let o = dir.path().join("fit");
    let dummy = dir.path().join("unused.log");
    fs::write(&dummy, "").unwrap();
    ok(&["sweep", "--log", p(&dummy), "--fit-points", p(&pts), "-o", p(&o)]);
    let fit = json(&o.join("fit.json"));
    assert!((fit["alpha"].as_f64().unwrap() - 0.25).abs() <= 1e-10);
}

#[test]
fn sweep_dedups_sizes_and_rejects_oversized() {
    let dir = TempDir::new().unwrap();
    let s = synth(dir.path(), 400, 1500, 2);
    let log = s.join("events.log");
    let o = dir.path().join("sw");
    let out = ok(&["sweep", "--log", p(&log), "--sizes", "50,100,100,200", "-o", p(&o)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate sweep sizes"));
    assert_eq!(csv_rows(&o.join("scaling.csv")).len(), 3);
    assert_eq!(json(&o.join("manifest.json"))["sizes"], serde_json::json!([50, 100, 200]));

    let out = run(&["sweep", "--log", p(&log), "--sizes", "50,5000", "-o", p(&dir.path().join("x"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds the population"));
}

struct ProbeFixture {
    dir: TempDir,
    run: PathBuf,
}

fn probe_fixture() -> ProbeFixture {
    let dir = TempDir::new().unwrap();
    let s = synth(dir.path(), 300, 1200, 9);
    let run = dir.path().join("a");
    ok(&["analyze", "--log", p(&s.join("events.log")), "--ns", "150", "-o", p(&run)]);
    ProbeFixture { dir, run }
}

#[test]
fn probe_saturation_and_zero_radius() {
    let f = probe_fixture();
    let o = f.dir.path().join("p1");
    ok(&["probe", "--run", p(&f.run), "--center", "0,0,0", "--radius", "1e9", "-o", p(&o)]);
    let report = json(&o.join("report.json"));
    assert_eq!(report["members"].as_array().unwrap().len(), 150);
    let points = csv_rows(&o.join("points.csv"));
    assert_eq!(points.len(), 150);

    let target = &points[17];
    let center = target[2..].join(",");
    let o2 = f.dir.path().join("p2");
    ok(&["probe", "--run", p(&f.run), "--center", &center, "--radius", "0", "-o", p(&o2)]);
    let members = json(&o2.join("report.json"))["members"].clone();
    assert_eq!(members, serde_json::json!([target[1]]));
}

#[test]
fn probe_negative_center_and_citation_threshold() {
    let f = probe_fixture();
    let o = f.dir.path().join("p0");
    ok(&["probe", "--run", p(&f.run), "--center", "0,0,0", "--radius", "1e9", "-o", p(&o)]);
    let papers: Vec<String> = json(&o.join("report.json"))["papers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["bibcode"].as_str().unwrap().to_owned())
        .collect();
    let table = f.dir.path().join("cites.tsv");
    let mut text = String::from("# bibcode\tcitations\n");
    for (i, b) in papers.iter().enumerate().take(40) {
        text += &format!("{b}\t{}\n", i % 20);
    }
    fs::write(&table, text).unwrap();

    let o = f.dir.path().join("p3");
    ok(&[
        "probe",
        "--run",
        p(&f.run),
        "--center",
        "-0.5,0.1,-0.2",
        "--radius",
        "1e9",
        "--citations",
        p(&table),
        "--min-citations",
        "10",
        "-o",
        p(&o),
    ]);
    let report = json(&o.join("report.json"));
    let listed = report["papers"].as_array().unwrap();
    assert_eq!(listed.len(), 20);
    assert!(listed.iter().all(|p| p["citations"].as_u64().unwrap() >= 10));
    let cites: Vec<u64> = listed.iter().map(|p| p["citations"].as_u64().unwrap()).collect();
    assert!(cites.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn probe_dimension_mismatch_is_an_error() {
    let f = probe_fixture();
    let out = run(&[
        "probe",
        "--run",
        p(&f.run),
        "--center",
        "0,0",
        "--radius",
        "1",
        "--k",
        "3",
        "-o",
        p(&f.dir.path().join("bad")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
}

#[test]
fn probe_rejects_non_analyze_runs() {
    let dir = TempDir::new().unwrap();
    let s = synth(dir.path(), 50, 300, 1);
    let out = run(&["probe", "--run", p(&s), "--center", "0,0,0", "--radius", "1", "-o", p(&dir.path().join("x"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not an analyze run"));
}
