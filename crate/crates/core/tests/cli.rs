//! End-to-end runs of the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

use sobolev_lip::approximation::{approximate, ApproximationData};
use sobolev_lip::io::{parse_space_json, read_field_csv};
use sobolev_lip::SetRole;

const SPACE: &str = r#"{
  "points": [[0.0], [0.1], [0.2], [0.35], [0.5], [0.9]],
  "metric": "l2",
  "measure": [1, 1, 1, 1, 1, 0.5],
  "fields": {
    "f": [0.0, 0.4, 0.3, 0.75, 0.2, 0.7],
    "g": [1.0, 2.0, 0.5, 1.0, 3.0, 1.0]
  },
  "sets": {"a": [0, 3]}
}"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sobolev-lip"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn approximate_matches_library_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let space = dir.path().join("space.json");
    std::fs::write(&space, SPACE).unwrap();
    let outs: Vec<Vec<u8>> = (0..2)
        .map(|k| {
            let out = dir.path().join(format!("ft{k}.csv"));
            let o = bin(&[
                "approximate", "--space", path(&space), "--field", "f", "--gradient", "g",
                "--set", "a", "--M", "0.8", "--delta", "0.16", "--out", path(&out),
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            std::fs::read(&out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    let text = String::from_utf8(outs[0].clone()).unwrap();
    assert!(text.starts_with("# sobolev-lip "));
    assert!(text.contains("# config_sha256: "));

    let loaded = parse_space_json(SPACE).unwrap();
    let data = ApproximationData {
        f: loaded.field("f").unwrap().clone(),
        g: loaded.field("g").unwrap().clone(),
        start_set: loaded.set("a", SetRole::A).unwrap(),
        cap: 0.8,
        delta: 0.16,
    };
    let expect = approximate(&loaded.space, &data).unwrap();
    let got = read_field_csv(&dir.path().join("ft0.csv"), "f_tilde").unwrap();
    assert_eq!(got.values, expect.values);
}

#[test]
fn experiments_write_headers_and_rerun_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{
  "seed": 7,
  "converge": {
    "space": {"kind": "interval", "n": 200},
    "field": {"kind": "power", "axis": 0, "exponent": 2.0, "scale": 1.0, "offset": 0.0},
    "gradient": {"kind": "linear", "coeffs": [2.0], "offset": 0.01},
    "cap": 1.5,
    "deltas": [0.1, 0.05]
  },
  "lemma_suite": {"instances": 20, "oracle_instances": 20, "monotone_pairs": 10, "max_n": 15},
  "poincare": {
    "space": {"kind": "interval", "n": 200},
    "field": {"kind": "linear", "coeffs": [1.0], "offset": 0.0},
    "notions": [{"lip_a_scale": 0.02}, {"lip_scale": 0.02}],
    "lambdas": [1.0],
    "balls": {"kind": "grid", "stride": 50, "r0": 0.05, "ratio": 2.0, "count": 3}
  }
}"#,
    )
    .unwrap();
    for (cmd, files) in [
        ("converge", vec!["converge.csv"]),
        ("lemma-suite", vec!["lemma_suite.csv"]),
        ("poincare", vec!["poincare.csv", "poincare_summary.json"]),
    ] {
        let runs: Vec<Vec<Vec<u8>>> = (0..2)
            .map(|k| {
                let out = dir.path().join(format!("{cmd}{k}"));
                let o = bin(&[cmd, "--config", path(&cfg), "--out-dir", path(&out)]);
                assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
                files.iter().map(|f| std::fs::read(out.join(f)).unwrap()).collect()
            })
            .collect();
        assert_eq!(runs[0], runs[1], "{cmd} output differs between runs");
        let first = String::from_utf8(runs[0][0].clone()).unwrap();
        assert!(first.contains("# seed: 7"), "{cmd}");
    }
    let summary: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("poincare0/poincare_summary.json")).unwrap(),
    )
    .unwrap();
    assert!(summary["ordering"].as_array().unwrap().iter().all(|o| o["holds"] == true));
}

#[test]
fn negated_cost_fails_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"lemma_suite": {"instances": 30, "oracle_instances": 30, "monotone_pairs": 10, "max_n": 20}}"#).unwrap();
    let out = dir.path().join("out");
    let ok = bin(&["lemma-suite", "--config", path(&cfg), "--out-dir", path(&out)]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = bin(&["lemma-suite", "--config", path(&cfg), "--out-dir", path(&out), "--negate-cost"]);
    assert_eq!(bad.status.code(), Some(1));
    let csv = std::fs::read_to_string(out.join("lemma_suite.csv")).unwrap();
    assert!(csv.contains("check,checked,violations,status"));
    assert!(csv.contains(",fail"));
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{\n  \"seed\": 1,\n  \"bogus\": true\n}").unwrap();
    let o = bin(&["converge", "--config", path(&cfg), "--out-dir", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    std::fs::write(&cfg, r#"{"counterexample": {"m": 50, "frequencies": [5]}}"#).unwrap();
    let o = bin(&["counterexample", "--config", path(&cfg), "--out-dir", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));

    let matrix = dir.path().join("m.csv");
    std::fs::write(&matrix, "0,1,5\n1,0,1\n5,1,0\n").unwrap();
    let o = bin(&["validate-space", "--matrix-csv", path(&matrix)]);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(&matrix, "0,1,2\n1,0,1\n2,1,0\n").unwrap();
    let o = bin(&["validate-space", "--matrix-csv", path(&matrix)]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["n"], 3);
}
