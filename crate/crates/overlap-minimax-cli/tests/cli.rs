use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_overlap-minimax"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn error_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr carries a JSON error")
}

fn csv_rows(bytes: &[u8]) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(bytes).records().map(|r| r.unwrap()).collect()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Example-1 draw with 200 units written as CSV.
fn example_dataset(dir: &TempDir) -> PathBuf {
    let cfg = write(dir, "design.json", r#"{"kind": "example1", "n": 200}"#);
    let out = dir.path().join("data.csv");
    ok(&["simulate", "--input", s(&cfg), "--seed", "3", "--output", s(&out)]);
    out
}

#[test]
fn analyze_reports_every_method_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = example_dataset(&dir);
    let args = ["analyze", "--input", s(&data), "--L", "22", "--epsilon-set", "0.01,0.03,0.05"];
    let first = ok(&args);
    assert_eq!(first, ok(&args), "same flags, same bytes");

    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "analyze");
    for m in ["aipw", "aipwp", "mp", "m", "mc"] {
        let lo = v[m]["lower"].as_f64().unwrap();
        let hi = v[m]["upper"].as_f64().unwrap();
        assert!(lo <= hi, "{m}");
        assert!((v[m]["metrics"]["length"].as_f64().unwrap() - (hi - lo)).abs() < 1e-12);
    }
    let len = |m: &str| v[m]["metrics"]["length"].as_f64().unwrap();
    assert!(len("mp") < len("m"));
    assert!(v["epsilon"]["candidates"].as_array().unwrap().len() == 3);
}

#[test]
fn percentile_constant_is_reported() {
    let dir = TempDir::new().unwrap();
    let data = example_dataset(&dir);
    let v: Value = serde_json::from_slice(&ok(&[
        "analyze", "--input", s(&data), "--percentiles", "0.9", "--epsilon", "0.05",
    ]))
    .unwrap();
    assert_eq!(v["lipschitz"]["percentile"], 0.9);
    assert!(v["lipschitz"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn malformed_csv_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.csv", "x1,y,z\n0.1,0.2,1\n");
    let out = run(&["analyze", "--input", s(&bad), "--L", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "schema");

    let bad_z = write(&dir, "badz.csv", "x1,y,z,pi\n0.1,0.2,7,0.5\n");
    let out = run(&["analyze", "--input", s(&bad_z), "--L", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "schema");
}

#[test]
fn invalid_flags_are_validation_errors() {
    let dir = TempDir::new().unwrap();
    let data = example_dataset(&dir);
    for args in [
        vec!["analyze", "--input", s(&data), "--L", "1", "--alpha", "1.5"],
        vec!["analyze", "--input", s(&data)],
        vec!["analyze", "--input", s(&data), "--L", "1", "--epsilon", "0.7"],
        vec!["sensitivity", "--input", s(&data), "--percentiles", "0"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(error_json(&out)["error"], "validation", "{args:?}");
    }
    // Flag parsing errors share the validation exit code.
    assert_eq!(run(&["analyze", "--bogus"]).status.code(), Some(2));
}

#[test]
fn all_overlap_data_gives_point_non_overlap_interval() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("x1,y,z,pi,sigma\n");
    for i in 0..40 {
        let x = i as f64 / 40.0;
        let z = i % 2;
        text.push_str(&format!("{x},{},{z},0.5,0.1\n", x + 0.3 * z as f64 + 0.01 * ((i * 7) % 5) as f64));
    }
    let data = write(&dir, "overlap.csv", &text);
    let v: Value =
        serde_json::from_slice(&ok(&["analyze", "--input", s(&data), "--L", "1", "--epsilon", "0.1"])).unwrap();
    assert_eq!(v["mp"]["degenerate"], true);
    assert_eq!(v["mp"]["lower"], 0.0);
    assert_eq!(v["mp"]["upper"], 0.0);
    let part = &v["mc"]["overlap_part"];
    assert_eq!(part["alpha"], 0.025);
    assert!((v["mc"]["lower"].as_f64().unwrap() - part["lower"].as_f64().unwrap()).abs() < 1e-12);
    assert!((v["mc"]["upper"].as_f64().unwrap() - part["upper"].as_f64().unwrap()).abs() < 1e-12);
    assert!(!v["warnings"].as_array().unwrap().is_empty());

    let out = run(&["analyze", "--input", s(&data), "--L", "1", "--epsilon", "0.1", "--strict"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_json(&out)["error"], "degenerate_estimand");
}

#[test]
fn sensitivity_rows_follow_the_grid() {
    let dir = TempDir::new().unwrap();
    let data = example_dataset(&dir);
    let rows = csv_rows(&ok(&[
        "sensitivity", "--input", s(&data), "--epsilon", "0.05", "--percentiles", "0.8,0.85,0.9,0.95",
    ]));
    assert_eq!(rows.len(), 4);
    let lengths: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(lengths.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)), "{lengths:?}");

    let single = csv_rows(&ok(&["sensitivity", "--input", s(&data), "--epsilon", "0.05", "--L", "4"]));
    assert_eq!(single.len(), 1);
    assert_eq!(&single[0][0], "", "explicit constants carry no percentile");
    assert_eq!(&single[0][1], "4");

    let json = dir.path().join("curve.json");
    ok(&["sensitivity", "--input", s(&data), "--epsilon", "0.05", "--L", "2,4", "--output", s(&json)]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["points"].as_array().unwrap().len(), 2);
}

#[test]
fn coverage_emits_one_row_per_method_and_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "cov.json",
        r#"[{"dgp": {"kind": "example1", "n": 120, "eta_dgp": 0.05}, "reps": 3, "lipschitz": 14},
            {"dgp": {"kind": "example1", "n": 120, "eta_dgp": 0.01}, "reps": 3, "lipschitz": 14,
             "methods": ["aipwp", "mp"]}]"#,
    );
    let args = ["coverage", "--input", s(&cfg), "--seed", "5"];
    let out = ok(&args);
    assert_eq!(out, ok(&args));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 5 + 2);
    assert!(rows.iter().all(|r| &r[5] == "5"));
}

#[test]
fn simulate_output_round_trips_through_analyze() {
    let dir = TempDir::new().unwrap();
    let out = ok(&["simulate", "--design", "collection", "--seed", "1"]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 500);
    let json = ok(&["simulate", "--design", "case-study", "--format", "json"]);
    let v: Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(v["design"]["kind"], "case_study");
    assert!(v["tau"].is_number());
    let _ = dir;
}

#[test]
fn sample_options_lists_each_option_per_level() {
    let rows = csv_rows(&ok(&["sample-options", "--L", "3", "--reps", "2"]));
    let names: Vec<&str> = rows.iter().map(|r| r.get(0).unwrap()).collect();
    assert_eq!(names, ["oracle", "option_2", "option_1"]);
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn confseq_emits_step_records() {
    let out = ok(&["confseq", "--seed", "2"]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 6);
    let alphas: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(alphas.windows(2).all(|w| w[1] < w[0]));
    let v: Value = serde_json::from_slice(&ok(&["confseq", "--seed", "2", "--format", "json"])).unwrap();
    assert_eq!(v["steps"].as_array().unwrap().len(), 6);
    assert_eq!(v["config"]["epochs"].as_array().unwrap().len(), 6);
}
