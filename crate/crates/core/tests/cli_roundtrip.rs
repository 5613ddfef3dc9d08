use std::path::Path;
use std::process::Command;

use qpath::io::{read_json, Table};
use serde_json::Value;

fn qpath(args: &[&str], out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_qpath"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("QPATH_THREADS", "2")
        .status()
        .unwrap()
        .code()
        .unwrap()
}

fn kind_of(path: &Path) -> String {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1, "{}", path.display());
    v["kind"].as_str().unwrap().to_string()
}

/// Every CSV parses as a numeric table and every JSON document carries its envelope.
fn check_outputs(dir: &Path) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => {
                let t = Table::read(&path).unwrap();
                assert!(!t.rows.is_empty(), "{}", path.display());
            }
            Some("json") => {
                let kind = kind_of(&path);
                read_json::<Value>(&path, &kind).unwrap();
            }
            _ => {}
        }
    }
}

#[test]
fn riccati_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(qpath(&["riccati", "--seed", "7"], &a), 0);
    assert_eq!(qpath(&["riccati", "--seed", "7"], &b), 0);
    for name in ["riccati.json", "G.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    check_outputs(&a);
}

#[test]
fn hopf_demo_writes_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hopf");
    assert_eq!(qpath(&["demo", "hopf"], &out), 0);
    for name in ["cycle.csv", "frame.csv", "G.csv", "extremals.csv", "map.csv", "tube.csv", "study.csv", "path.csv", "result.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let g = Table::read(&out.join("G.csv")).unwrap();
    let col = g.column("G_00").unwrap();
    assert!(col.iter().all(|v| (v - 4.0).abs() <= 1e-6));
    check_outputs(&out);
}

#[test]
fn twolc_demo_action() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("twolc");
    assert_eq!(qpath(&["demo", "twolc", "--N", "160"], &out), 0);
    let result: Value = read_json(&out.join("result.json"), "result").unwrap();
    let action = result["action"].as_f64().unwrap();
    assert!((action - 0.1599).abs() <= 2e-3, "{action}");
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{ "schema_version": 1, "system": { "system": "vdp" }, "numeric": { "samples": 256 } }"#).unwrap();
    let out = dir.path().join("vdp");
    assert_eq!(qpath(&["cycle", "--config", cfg.to_str().unwrap()], &out), 0);
    let cycle: Value = read_json(&out.join("cycle.json"), "cycle").unwrap();
    assert!((cycle["period"].as_f64().unwrap() - 6.6633).abs() <= 5e-3);
    assert_eq!(Table::read(&out.join("cycle.csv")).unwrap().rows.len(), 256);
}

#[test]
fn usage_and_numerical_failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qpath(&["demo", "nosuch"], &dir.path().join("x")), 2);
    assert_eq!(qpath(&["frobnicate"], &dir.path().join("x")), 2);

    let cfg = dir.path().join("degenerate.json");
    std::fs::write(
        &cfg,
        r#"{ "schema_version": 1, "system": { "system": "vdp", "diffusion_case": "ii" }, "numeric": { "x_end": [2.0, -2.5] } }"#,
    )
    .unwrap();
    let out = dir.path().join("fail");
    assert_eq!(qpath(&["study", "--config", cfg.to_str().unwrap()], &out), 1);
    let failure: Value = read_json(&out.join("error.json"), "failure").unwrap();
    assert_eq!(failure["stage"], "study");
}
