use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mlgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlgm")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_small(dir: &Path, seed: &str) -> std::path::PathBuf {
    let file = dir.join(format!("p{seed}.mlg"));
    let out = mlgm(&[
        "gen",
        "--seed",
        seed,
        "--inliers",
        "5",
        "--outliers",
        "1",
        "--attributes",
        "2",
        "--out",
        path(&file),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    file
}

fn solve_json(file: &Path, method: &str) -> (Output, Value) {
    let out = mlgm(&["solve", path(file), "--method", method, "--theta-step", "0.1"]);
    let json = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out, json)
}

#[test]
fn gen_is_deterministic_and_defaults_to_stdout() {
    let a = mlgm(&[
        "gen",
        "--seed",
        "4",
        "--inliers",
        "4",
        "--outliers",
        "0",
        "--attributes",
        "2",
    ]);
    let b = mlgm(&[
        "gen",
        "--seed",
        "4",
        "--inliers",
        "4",
        "--outliers",
        "0",
        "--attributes",
        "2",
    ]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).starts_with("MLGM 1"));
}

#[test]
fn solve_reports_a_matching_and_its_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let file = gen_small(dir.path(), "1");
    let (out, json) = solve_json(&file, "mlfgm");
    assert!(
        matches!(out.status.code(), Some(0 | 1)),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(json["method"], "mlfgm");
    assert_eq!(json["matching"].as_array().unwrap().len(), 6);
    let acc = json["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(json["report"]["lc_trace"].is_array());
}

#[test]
fn spectral_baseline_returns_a_one_to_one_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let file = gen_small(dir.path(), "2");
    for method in ["sm-integrated", "sm-single-best"] {
        let (out, json) = solve_json(&file, method);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let mut cols: Vec<u64> = json["matching"]
            .as_array()
            .unwrap()
            .iter()
            .filter_map(Value::as_u64)
            .collect();
        let matched = cols.len();
        cols.sort_unstable();
        cols.dedup();
        assert_eq!(cols.len(), matched);
        assert!(json.get("report").is_none());
    }
}

#[test]
fn solve_writes_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = gen_small(dir.path(), "3");
    let result = dir.path().join("r.json");
    let out = mlgm(&[
        "solve",
        path(&file),
        "--method",
        "sm-integrated",
        "--out",
        path(&result),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let json: Value = serde_json::from_str(&fs::read_to_string(result).unwrap()).unwrap();
    assert_eq!(json["method"], "sm-integrated");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = gen_small(dir.path(), "5");
    let out = mlgm(&["solve", path(&file), "--method", "magic"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sm-integrated"));

    let text = fs::read_to_string(&file).unwrap().replacen("MLGM 1", "MLGM 9", 1);
    let bad = dir.path().join("v9.mlg");
    fs::write(&bad, text).unwrap();
    assert_eq!(mlgm(&["solve", path(&bad)]).status.code(), Some(2));

    assert_eq!(
        mlgm(&["solve", path(&dir.path().join("missing.mlg"))]).status.code(),
        Some(2)
    );

    let truncated = dir.path().join("cut.mlg");
    let text = fs::read_to_string(&file).unwrap();
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    let out = mlgm(&["solve", path(&truncated)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    let out = mlgm(&[
        "bench",
        "--method",
        "mlfgm,mlfgm",
        "--out",
        path(&dir.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = mlgm(&["bench", "--kind", "rotation", "--out", path(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_writes_one_row_per_trial_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let out = mlgm(&[
        "bench",
        "--kind",
        "deformation",
        "--trials",
        "1",
        "--method",
        "mlfgm,sm-integrated",
        "--theta-step",
        "0.1",
        "--out",
        path(&csv),
    ]);
    assert!(
        matches!(out.status.code(), Some(0 | 1)),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "seed,method,kind,value,trial,accuracy,objective");
    assert_eq!(lines.len(), 1 + 7 * 2);
    assert!(lines[1..].iter().all(|l| l.contains(",deformation,")));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.csv.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["points"].as_array().unwrap().len(), 7);
}

#[test]
fn verify_passes() {
    let out = mlgm(&["verify"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
    assert!(!text.contains("FAIL"));
}
