use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TWO_POINT: &str = r#"{"nu":{"atoms":[[0,1]]},"mu":{"atoms":[[-1,0.5],[1,0.5]]},"horizon":1,"dx":0.05,
"embed":{"n_paths":100000,"dt_sim":0.0025,"t_max":10,"seed":1,"bridge_correction":false}}"#;

const SPLIT: &str = r#"{"nu":{"atoms":[[-1,0.5],[1,0.5]]},"mu":{"pieces":[[-0.5,0.5,1.0]]},"horizon":1,"dx":0.05}"#;

fn rost(command: &str, spec: &str, dir: &Path) -> Output {
    let path = dir.join("spec.json");
    fs::write(&path, spec).unwrap();
    Command::new(env!("CARGO_BIN_EXE_rost"))
        .args([command, "--spec"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

#[test]
fn verify_passes_on_two_point_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = rost("verify", TWO_POINT, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "verify.json")).unwrap();
    assert_eq!(report["pass"], true);
}

#[test]
fn verify_fails_when_paths_stop_early() {
    let dir = tempfile::tempdir().unwrap();
    let spec = TWO_POINT.replace(r#""t_max":10"#, r#""t_max":2"#).replace("100000", "2000");
    let out = rost("verify", &spec, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL absorbed_fraction"));
}

#[test]
fn split_pair_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for command in ["validate", "verify"] {
        let out = rost(command, SPLIT, dir.path());
        assert_eq!(out.status.code(), Some(3));
        assert!(String::from_utf8_lossy(&out.stderr).contains("D.1"));
    }
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "validation.json")).unwrap();
    assert_eq!(report["d1_ok"], false);
}

#[test]
fn solve_without_gap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rost("solve", SPLIT, dir.path()).status.code(), Some(3));
}

#[test]
fn unreadable_spec_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rost("solve", "{not json", dir.path()).status.code(), Some(2));
    let bad_mass = r#"{"nu":{"atoms":[[0,0.5]]},"mu":{"atoms":[[-1,0.5],[1,0.5]]},"horizon":1,"dx":0.05}"#;
    assert_eq!(rost("solve", bad_mass, dir.path()).status.code(), Some(2));
    let bad_dx = TWO_POINT.replace(r#""dx":0.05"#, r#""dx":-1"#);
    assert_eq!(rost("solve", &bad_dx, dir.path()).status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic_and_documented() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let spec = TWO_POINT.replace("100000", "5000");
    for command in ["payoff", "solve", "reverse", "embed"] {
        for dir in [&a, &b] {
            let out = rost(command, &spec, dir.path());
            assert_eq!(out.status.code(), Some(0), "{command}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let mut names: Vec<String> = fs::read_dir(a.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    for name in &names {
        let text = read(a.path(), name);
        assert_eq!(text, read(b.path(), name), "{name} differs between runs");
        if name.ends_with(".csv") {
            assert!(text.starts_with('#'), "{name} has no header comment");
        }
    }
    for expected in ["payoff.csv", "value.csv", "excess.csv", "boundaries.csv", "solve.json", "barrier.csv", "inverse.csv", "detectors.json", "samples.csv", "embedding.json"] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }
}

#[test]
fn quiet_suppresses_progress() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    fs::write(&path, TWO_POINT).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rost"))
        .args(["payoff", "--quiet", "--spec"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stderr.is_empty());
}
