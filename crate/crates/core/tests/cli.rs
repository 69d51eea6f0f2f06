use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn privroute(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privroute"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn critical_counts_on_sioux_falls() {
    let dir = tempfile::tempdir().unwrap();
    let net = data("SiouxFalls_net.tntp");
    let out = privroute(&["critical-counts", "--net", s(&net), "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("critical_summary.json"));
    assert_eq!(summary["edges"], 76);
    assert_eq!(summary["min_integer_count"], 127.0);
    assert!(summary["fraction_above"].as_f64().unwrap() > 0.8);
    let rows = std::fs::read_to_string(dir.path().join("critical_counts.csv")).unwrap();
    assert_eq!(rows.lines().count(), 77);
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "critical-counts");
    assert!(manifest["git_describe"].is_string());
}

#[test]
fn critical_counts_on_empty_network() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("empty.tntp");
    std::fs::write(&net, "<NUMBER OF NODES> 0\n<NUMBER OF LINKS> 0\n<END OF METADATA>\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = privroute(&["critical-counts", "--net", s(&net), "--out", s(&out_dir)]);
    assert!(out.status.success());
    let summary = read_json(&out_dir.join("critical_summary.json"));
    assert_eq!(summary["fraction_above"], "NA");
    let rows = std::fs::read_to_string(out_dir.join("critical_counts.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1);
}

#[test]
fn missing_file_exits_three_and_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = privroute(&["critical-counts", "--net", "/no/such/net.tntp", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/net.tntp"));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let net = data("SiouxFalls_net.tntp");
    let trips = data("SiouxFalls_trips.tntp");
    let out = privroute(&["simulate", "--net", s(&net), "--trips", s(&trips), "--epsilon", "-1", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = privroute(&["simulate", "--net", s(&net), "--trips", s(&trips), "--dt", "125", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = privroute(&["verify-theorem1", "--p-fail", "1.5", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_and_noise_free_limit_is_neutral() {
    let dir = tempfile::tempdir().unwrap();
    let net = data("SiouxFalls_net.tntp");
    let trips = data("SiouxFalls_trips.tntp");
    let run = |eps: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = privroute(&[
            "simulate", "--net", s(&net), "--trips", s(&trips), "--epsilon", eps, "--horizon", "1800", "--seed", "7",
            "--trace", "--out", s(&out_dir),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let a = run("0.1", "a");
    let b = run("0.1", "b");
    for file in ["metrics.json", "metrics.csv", "vehicles_private.csv", "vehicles_non_private.csv"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    let metrics = read_json(&a.join("metrics.json"));
    for key in ["increase_seconds", "increase_percent", "routes_unchanged_percent", "no_increase_percent"] {
        assert!(metrics["comparison"][key].is_number(), "{key}");
    }

    let c = run("1e9", "c");
    let metrics = read_json(&c.join("metrics.json"));
    assert!(metrics["comparison"]["increase_percent"].as_f64().unwrap().abs() < 0.01);
}

#[test]
fn fit_noise_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = privroute(&["fit-noise", "--epsilon", "0.2", "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("fit_report.json"));
    for key in ["epsilon", "d", "q", "scale", "max_abs_error", "ks_distance"] {
        assert!(!report[key].is_null(), "{key}");
    }
    assert_eq!(report["d"], 15);
    assert!(report["ks_distance"].as_f64().unwrap() < 0.05);
}

#[test]
fn protocol_demo_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let out = privroute(&[
        "protocol-demo", "--parties", "4", "--edges", "2", "--degree", "3", "--uniform-bits", "4", "--seed", "1",
        "--out", s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let round = read_json(&dir.path().join("round.json"));
    assert_eq!(round["exact_counts"], serde_json::json!([2, 2]));
    let text = std::fs::read_to_string(dir.path().join("transcript.jsonl")).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len() as u64, round["messages"].as_u64().unwrap());
    for l in &lines {
        for key in ["edge", "phase", "from", "to", "value"] {
            assert!(!l[key].is_null());
        }
    }
    let out = privroute(&["protocol-demo", "--parties", "2", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_theorem1_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = privroute(&["verify-theorem1", "--trials", "2000", "--seed", "3", "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("theorem1.json"));
    assert_eq!(report["condition"]["holds"], true);
    assert_eq!(report["trials"].as_array().unwrap().len(), 5);
    let rows = std::fs::read_to_string(dir.path().join("theorem1.csv")).unwrap();
    assert_eq!(rows.lines().count(), 6);
}
