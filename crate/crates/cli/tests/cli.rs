use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use revmono::lab::Instance;
use revmono::Caps;

fn revmono(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revmono")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/smoke")
}

fn json_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
}

#[test]
fn empty_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = revmono(&["check", "--instances", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no instances"));
}

#[test]
fn malformed_instance_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{\"n\": 1}").unwrap();
    let out = revmono(&["check", "--instances", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn smoke_fixtures_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = revmono(&[
        "check",
        "--suite",
        "all",
        "--instances",
        fixtures().to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(dir.path().join("report.json").is_file());
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.lines().count() > json_files(&fixtures()).len());
}

#[test]
fn theorem1_report_has_revenue_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let out = revmono(&[
        "check",
        "--suite",
        "theorem1",
        "--instances",
        fixtures().to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["meta"]["seed"], 7);
    let mono: Vec<_> =
        report["records"].as_array().unwrap().iter().filter(|rec| rec["name"] == "single_param_monotone").collect();
    assert_eq!(mono.len(), json_files(&fixtures()).len());
}

#[test]
fn failing_certificate_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(fixtures().join("theorem1-0000.json")).unwrap();
    let mut inst: serde_json::Value = serde_json::from_str(&src).unwrap();
    inst["params"]["certificate"] =
        serde_json::json!({"rev_f": ["5", "1"], "rev_g": ["1", "1"], "gap": ["4", "1"], "strict": [[0, 0]]});
    fs::write(dir.path().join("cert.json"), serde_json::to_string(&inst).unwrap()).unwrap();
    let out = revmono(&["check", "--instances", dir.path().join("cert.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn gen_shapes_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = revmono(&[
        "gen",
        "--suite",
        "theorem3",
        "--count",
        "4",
        "--n",
        "2",
        "--m",
        "2",
        "--support",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let files = json_files(dir.path());
    assert_eq!(files.len(), 4);
    for f in files {
        let inst = Instance::from_json(&fs::read_to_string(&f).unwrap(), &Caps::default()).unwrap();
        assert_eq!((inst.n, inst.m), (2, 2));
    }
}

#[test]
fn zero_strength_copies_f() {
    let dir = tempfile::tempdir().unwrap();
    let out = revmono(&["gen", "--count", "4", "--strength", "0", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    for f in json_files(dir.path()) {
        let inst: serde_json::Value = serde_json::from_str(&fs::read_to_string(f).unwrap()).unwrap();
        assert_eq!(inst["F"], inst["G"]);
    }
}

#[test]
fn bad_strength_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = revmono(&["gen", "--strength", "3/2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_budget_search_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = revmono(&["search", "--budget", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("search.json")).unwrap()).unwrap();
    assert_eq!(result["evaluated"], 0);
    assert_eq!(result["found"].as_array().unwrap().len(), 0);
}

#[test]
fn single_item_search_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = revmono(&["search", "--m", "1", "--budget", "200", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json_files(dir.path()).iter().all(|p| p.file_name().unwrap() == "search.json"));
}
