use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn optpart(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optpart"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SMALL_RUN: &str = r#"{
  "solver": {"components": 3, "spacing": 0.015625, "coarsest_cells": 16},
  "tubes": {"rho_min_cells": 1}
}"#;

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&optpart(&["--help"], d)), 0);
    assert_eq!(code(&optpart(&["--version"], d)), 0);
    assert_eq!(code(&optpart(&["frobnicate"], d)), 1);
    assert_eq!(code(&optpart(&["frequency", "--point", "0,0"], d)), 1);
    write(&d.join("bad.json"), r#"{"solver": {"components": 0}}"#);
    assert_eq!(code(&optpart(&["solve", "--config", "bad.json", "--out", "x"], d)), 1);
    write(&d.join("typo.json"), r#"{"solvr": {}}"#);
    assert_eq!(code(&optpart(&["run", "--config", "typo.json"], d)), 1);
    assert_eq!(code(&optpart(&["report", "--out", "nothing-here"], d)), 3);
    assert_eq!(code(&optpart(&["frequency", "--field", "missing.sgf", "--point", "0,0"], d)), 3);
    write(&d.join("short.json"), r#"{"solver": {"spacing": 0.03125, "max_iters": 2, "coarsest_cells": 16}}"#);
    let o = optpart(&["solve", "--config", "short.json", "--out", "short"], d);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("short/field.sgf").exists());
    assert!(d.join("short/solve_report.json").exists());
}

#[test]
fn oracle_frequency_detect_and_cover() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = optpart(&["oracle", "--m", "3", "--spacing", "0.0078125", "--out", "m3.sgf"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("m3.json").exists());
    let o = optpart(&["frequency", "--field", "m3.sgf", "--point", "0,0", "--radii", "0.05:0.25:5"], d);
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let header = rdr.headers().unwrap().clone();
    let i_col = header.iter().position(|c| c == "I").unwrap();
    let iphi_col = header.iter().position(|c| c == "I_phi").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        for col in [i_col, iphi_col] {
            let v: f64 = r[col].parse().unwrap();
            assert!((v - 1.5).abs() < 0.02, "{v}");
        }
    }
    let o = optpart(&["frequency", "--field", "m3.sgf", "--point", "0.1,0", "--out", "f.csv"], d);
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_to_string(d.join("f.csv")).unwrap().starts_with("x,y,z,r,D,H"));

    let o = optpart(&["detect", "--field", "m3.sgf", "--out", "det", "--cells-csv"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let samples = json(&d.join("det/singular.json"));
    let junctions: Vec<&Value> = samples
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["classification"] == "junction")
        .collect();
    assert_eq!(junctions.len(), 1);
    assert!(d.join("det/interface_cells.csv").exists());

    let o = optpart(&["cover", "--field", "m3.sgf", "--out", "det", "--delta", "0.1"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cov = json(&d.join("det/covering.json"));
    assert!(!cov["covering"]["balls"].as_array().unwrap().is_empty());
    assert!(d.join("det/minkowski.csv").exists());
}

#[test]
fn analyze_an_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = optpart(&["analyze", "--oracle", "m=3", "--out", "an"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(d.join("an/frequency.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|c| c == name).unwrap();
    let (x, y, i) = (col("x"), col("y"), col("I"));
    let mut at_vertex = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        let px: f64 = r[x].parse().unwrap();
        let py: f64 = r[y].parse().unwrap();
        if px.hypot(py) < 1e-3 {
            at_vertex += 1;
            let v: f64 = r[i].parse().unwrap();
            assert!((v - 1.5).abs() < 0.02, "{v}");
        }
    }
    assert!(at_vertex > 0);
    assert_eq!(code(&optpart(&["analyze", "--oracle", "m=x", "--out", "an"], d)), 1);
}

#[test]
fn flatness_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        &d.join("atoms.json"),
        r#"{"dim": 2, "atoms": [{"point": [0.5, 0.5]}, {"point": [-0.5, 0.5]}, {"point": [0.5, -0.5]}, {"point": [-0.5, -0.5]}]}"#,
    );
    let o = optpart(&["flatness", "--atoms", "atoms.json", "--center", "0,0", "--radius", "2,4", "--k", "1"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let col = rdr.headers().unwrap().iter().position(|c| c == "flatness").unwrap();
    let vals: Vec<f64> = rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(vals, vec![0.125, 0.015625]);
    assert_eq!(code(&optpart(&["flatness", "--atoms", "none.json", "--center", "0,0", "--radius", "1"], d)), 3);
}

fn strip_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_seconds");
    v
}

#[test]
fn full_run_is_deterministic_and_traceable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(&d.join("run.json"), SMALL_RUN);
    for out in ["a", "b"] {
        let o = optpart(&["run", "--config", "run.json", "--seed", "5", "--out", out], d);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "summary.json",
        "summary.txt",
        "field.sgf",
        "frequency.csv",
        "singular.json",
        "analysis.json",
        "identities.json",
        "covering.json",
        "minkowski.csv",
    ] {
        let a = std::fs::read(d.join("a").join(f)).unwrap();
        let b = std::fs::read(d.join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between identical runs");
    }
    assert_eq!(
        strip_timing(json(&d.join("a/solve_report.json"))),
        strip_timing(json(&d.join("b/solve_report.json")))
    );

    // Summary numbers come from the artifacts.
    let a = d.join("a");
    let summary = json(&a.join("summary.json"));
    let report = json(&a.join("solve_report.json"));
    assert_eq!(summary["eigenvalues"], report["eigenvalues"]);
    let samples = json(&a.join("singular.json"));
    let samples = samples.as_array().unwrap();
    let junctions: Vec<&Value> = samples.iter().filter(|s| s["classification"] == "junction").collect();
    let walls = samples.len() - junctions.len();
    assert_eq!(summary["wall_samples"].as_u64().unwrap() as usize, walls);
    let rows = summary["junctions"].as_array().unwrap();
    assert_eq!(rows.len(), junctions.len());
    for (row, s) in rows.iter().zip(&junctions) {
        assert_eq!(row["order"], s["order"]);
        assert_eq!(row["location"], s["location"]);
    }
    let cov = json(&a.join("covering.json"));
    assert_eq!(
        summary["covering"]["balls"].as_u64().unwrap() as usize,
        cov["covering"]["balls"].as_array().unwrap().len()
    );
    assert_eq!(summary["minkowski"]["slope"], cov["junction_tube"]["slope"]);
    assert_eq!(summary["minkowski"]["interface_slope"], cov["interface_tube"]["slope"]);
    let analysis = json(&a.join("analysis.json"));
    assert_eq!(summary["comparison_constant"], analysis["comparison_constant"]);

    // The report stage alone reproduces the summary.
    let o = optpart(&["report", "--out", "a"], d);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(a.join("summary.json")).unwrap(), std::fs::read(d.join("b/summary.json")).unwrap());
}

#[test]
fn report_without_junctions_marks_an_empty_set() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        &d.join("two.json"),
        r#"{"solver": {"components": 2, "spacing": 0.015625, "coarsest_cells": 16}}"#,
    );
    let o = optpart(&["run", "--config", "two.json", "--out", "two"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&d.join("two/summary.json"));
    assert_eq!(summary["junctions"].as_array().unwrap().len(), 0);
    assert_eq!(summary["minkowski"]["status"], "empty set");
    let text = std::fs::read_to_string(d.join("two/summary.txt")).unwrap();
    assert!(text.contains("empty set"), "{text}");
}

#[test]
fn thread_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = optpart(&["--threads", "2", "oracle", "--m", "2", "--spacing", "0.0625", "--out", "o.sgf"], dir.path());
    assert_eq!(code(&o), 0);
}
