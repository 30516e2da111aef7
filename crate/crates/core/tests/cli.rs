use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn upcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_upcap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Square plate in the middle of a square domain, `side` nodes across.
fn write_condenser(path: &Path, side: usize) {
    let row = |f: &dyn Fn(usize) -> bool| -> String {
        (0..side).map(|i| if f(i) { '#' } else { '.' }).collect()
    };
    let mid = side / 2;
    let a: Vec<String> = (0..side)
        .map(|j| row(&|i| i > 0 && j > 0 && i + 1 < side && j + 1 < side))
        .collect();
    let c: Vec<String> = (0..side)
        .map(|j| row(&|i| i.abs_diff(mid) <= 1 && j.abs_diff(mid) <= 1))
        .collect();
    let json = serde_json::json!({ "h": 1.0, "a": a, "c": c });
    fs::write(path, json.to_string()).unwrap();
}

#[test]
fn cantor_then_up_estimate() {
    let dir = tempdir().unwrap();
    let set = dir.path().join("cantor.json");
    let o = upcap(&["cantor", "--depth", "10", "--out", set.to_str().unwrap()]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(&set).unwrap()).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 2048);

    let o = upcap(&["up-estimate", "--set", set.to_str().unwrap()]);
    assert!(o.status.success());
    let est: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let c = est["c_hat"].as_f64().unwrap();
    assert!((0.35..=0.6).contains(&c), "{c}");
}

#[test]
fn bounds_lists_beta() {
    let o = upcap(&["bounds", "--c", "0.4", "--n", "2"]);
    assert!(o.status.success());
    let reports: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let beta = reports
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == "beta_exponent")
        .expect("beta report present");
    assert!((beta["value"].as_f64().unwrap() - 0.34401).abs() < 1e-5);
}

#[test]
fn whitney_writes_svg_and_verifies() {
    let dir = tempdir().unwrap();
    let svg = dir.path().join("w.svg");
    let o = upcap(&[
        "whitney", "--builtin", "l-shape", "--level", "8", "--kmax", "6", "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["verify"]["overlap_violations"], 0);
    assert_eq!(summary["verify"]["upper_violations"], 0);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn capacity_solve_and_exit_codes() {
    let dir = tempdir().unwrap();
    let cond = dir.path().join("c.json");
    write_condenser(&cond, 41);
    let path = cond.to_str().unwrap();

    let o = upcap(&["capacity", "solve", "--cond", path]);
    assert!(o.status.success());
    let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(rep["capacity"].as_f64().unwrap() > 0.0);

    let o = upcap(&["capacity", "solve", "--cond", path, "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = upcap(&["capacity", "solve", "--cond", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let o = upcap(&["bounds", "--c", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let o = upcap(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ring_matches_closed_form() {
    let o = upcap(&["capacity", "ring", "--n", "2", "--a", "1", "--b", "2"]);
    assert!(o.status.success());
    let got: f64 = stdout(&o).trim().parse().unwrap();
    let want = 2.0 * std::f64::consts::PI / 2f64.ln();
    assert!(((got - want) / want).abs() < 1e-14, "{got}");
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempdir().unwrap();
    let cond = dir.path().join("c.json");
    write_condenser(&cond, 33);
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let o = upcap(&["capacity", "solve", "--cond", cond.to_str().unwrap(), "--refine"]);
            assert!(o.status.success());
            o.stdout
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let a = upcap(&["whitney", "--builtin", "punctured-square", "--level", "8", "--kmax", "6"]);
    let b = upcap(&["whitney", "--builtin", "punctured-square", "--level", "8", "--kmax", "6", "--jobs", "2"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn version_lists_kissing_table() {
    let o = upcap(&["--version"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("2 6 7"), "{text}");
}
