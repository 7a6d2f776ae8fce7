use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hgshift(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgshift"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr).to_string();
    assert_eq!(text.lines().count(), 1, "expected one error line, got {text:?}");
    text.trim().to_string()
}

/// Two 2-edge chains on disjoint vertices plus an isolated singleton.
const TOY: &str = r#"{"vertex_count": 7, "hyperedges": [
  {"weight": 1.0, "members": {"0": 1.0, "1": 1.0}},
  {"weight": 1.0, "members": {"1": 1.0, "2": 1.0}},
  {"weight": 1.0, "members": {"4": 1.0, "5": 1.0}},
  {"weight": 1.0, "members": {"5": 1.0, "6": 1.0}},
  {"weight": 1.0, "members": {"3": 1.0}}
]}"#;

#[test]
fn gen_crescents_writes_600_labeled_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = hgshift(dir.path(), &["gen", "crescents", "--n", "600", "--noise", "0", "--out", "pts.csv"]);
    assert!(out.status.success());
    let echo = json(&out.stdout);
    assert_eq!(echo["n"], 600);
    let text = std::fs::read_to_string(dir.path().join("pts.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 600);
    let mut labels: Vec<&str> = rows.iter().map(|r| r.rsplit(',').next().unwrap()).collect();
    labels.sort_unstable();
    labels.dedup();
    assert_eq!(labels.len(), 5);
}

#[test]
fn shift_confines_block_and_flags_isolated_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.json"), TOY).unwrap();
    let out = hgshift(dir.path(), &["shift", "--input", "toy.json", "--trajectory", "t.csv"]);
    assert!(out.status.success());
    let report = json(&out.stdout);
    let runs = report["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 5);
    for run in &runs[..2] {
        for s in run["certificate"]["support"].as_array().unwrap() {
            assert!(s.as_u64().unwrap() < 2);
        }
        assert!((run["certificate"]["lambda"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    }
    let isolated = &runs[4];
    assert_eq!(isolated["termination"], "isolated");
    assert_eq!(isolated["outlier"], true);
    assert_eq!(isolated["certificate"]["lambda"], 0.0);
    let trajectory = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(trajectory.starts_with("start,step,phase,F,"));
}

#[test]
fn shift_rejects_out_of_range_start() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.json"), TOY).unwrap();
    let out = hgshift(dir.path(), &["shift", "--input", "toy.json", "--start", "9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error: usage:"));
}

#[test]
fn shift_reports_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"vertex_count": 2, "hyperedges": [{"weight": 1.0, "members": {"0": 1.5}}]}"#).unwrap();
    let out = hgshift(dir.path(), &["shift", "--input", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).contains("probability out of range"));
}

#[test]
fn cluster_crescents_finds_five_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(hgshift(d, &["gen", "crescents", "--out", "pts.csv"]).status.success());
    let out = hgshift(d, &["cluster", "--input", "pts.csv", "--out", "a.csv", "--summary", "s.json"]);
    assert!(out.status.success());
    let summary = json(&std::fs::read(d.join("s.json")).unwrap());
    assert_eq!(summary["clusters"], 5);
    assert!(summary["nmi"].as_f64().unwrap() >= 0.99);
    assert_eq!(summary["config"]["k"], 12);
    let assignments = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(assignments.lines().count(), 600);
}

#[test]
fn cluster_blobs_without_labels_omits_nmi() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut text = String::new();
    for (cx, cy) in [(0.0, 0.0), (20.0, 0.0), (10.0, 20.0)] {
        for i in 0..30 {
            let a = i as f64 * 0.7;
            let r = 0.3 + 0.05 * (i % 7) as f64;
            text.push_str(&format!("{},{}\n", cx + r * a.cos(), cy + r * a.sin()));
        }
    }
    std::fs::write(d.join("blobs.csv"), text).unwrap();
    let out = hgshift(d, &["cluster", "--input", "blobs.csv", "--out", "a.csv"]);
    assert!(out.status.success());
    let summary = json(&out.stdout);
    assert_eq!(summary["clusters"], 3);
    assert!(summary.get("nmi").is_none_or(Value::is_null));
}

#[test]
fn cluster_rejects_k_not_below_n() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.csv"), "0,0\n1,0\n0,1\n").unwrap();
    let out = hgshift(dir.path(), &["cluster", "--input", "p.csv", "--out", "a.csv", "--k", "3"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(stderr_line(&out).starts_with("error:"));
}

#[test]
fn match_noise_free_instance_with_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(hgshift(d, &["gen", "match", "--n", "15", "--outliers", "5", "--out", "inst.json"]).status.success());
    let out = hgshift(d, &["match", "--input", "inst.json", "--baseline"]);
    assert!(out.status.success());
    let report = json(&out.stdout);
    assert_eq!(report["triplet"]["rate"], 1.0);
    assert!(report["pairwise"]["rate"].is_number());
    assert_eq!(report["triplet"]["selected"].as_array().unwrap().len(), 15);
}

#[test]
fn match_batch_reports_mean_and_stddev() {
    let dir = tempfile::tempdir().unwrap();
    let out = hgshift(dir.path(), &["match", "--batch", "4", "--baseline"]);
    assert!(out.status.success());
    let report = json(&out.stdout);
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
    assert_eq!(report["triplet"]["mean"], 1.0);
    assert!(report["pairwise"]["stddev"].is_number());
    assert_eq!(report["config"]["batch"], 4);
}

#[test]
fn usage_errors_are_single_line_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["bogus"],
        vec!["match", "--eps", "0"],
        vec!["match", "--noise", "0.1", "--noise-rel", "0.1"],
        vec!["cluster", "--input", "x.csv"],
    ] {
        let out = hgshift(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(stderr_line(&out).starts_with("error: usage:"), "{args:?}");
    }
}

#[test]
fn missing_input_is_a_run_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hgshift(dir.path(), &["cluster", "--input", "nope.csv", "--out", "a.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).contains("nope.csv"));
}
