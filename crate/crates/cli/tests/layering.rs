use std::collections::HashMap;
use std::ffi::OsString;
use std::path::Path;

use sevbench_cli::{run_with, CoresetFile};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn sevbench(args: &[&str], env: &[(&str, &str)]) -> Run {
    let env: HashMap<String, String> = env.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let argv: Vec<OsString> = std::iter::once("sevbench").chain(args.iter().copied()).map(OsString::from).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(argv, &|k| env.get(k).cloned(), &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn fixture(dir: &Path) -> String {
    let d = dir.to_str().unwrap();
    let r = sevbench(&["synth", "--n", "40", "--dim", "4", "--clusters", "2", "--out-dir", d], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    dir.join("vectors.bin").to_str().unwrap().to_string()
}

fn sampled_k(path: &Path) -> usize {
    let f: CoresetFile = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    f.result.k
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("custom.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn required_flag_can_come_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let vectors = fixture(dir.path());
    let out = dir.path().join("c.json");
    let r = sevbench(
        &["sample", "--vectors", &vectors, "--solver", "uniform", "--out", out.to_str().unwrap()],
        &[("SEVBENCH_K", "7")],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(sampled_k(&out), 7);
}

#[test]
fn command_line_beats_env_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    let vectors = fixture(dir.path());
    let cfg = write_config(dir.path(), "seed = 3\n\n[sample]\nk = 5\nsolver = \"uniform\"\n");
    let out = dir.path().join("c.json");
    let out_s = out.to_str().unwrap();
    let base = ["--config", cfg.as_str(), "sample", "--vectors", vectors.as_str(), "--out", out_s];

    assert_eq!(sevbench(&base, &[]).code, 0);
    assert_eq!(sampled_k(&out), 5);

    assert_eq!(sevbench(&base, &[("SEVBENCH_K", "6")]).code, 0);
    assert_eq!(sampled_k(&out), 6);

    let mut args = base.to_vec();
    args.extend(["--k", "8"]);
    assert_eq!(sevbench(&args, &[("SEVBENCH_K", "6")]).code, 0);
    assert_eq!(sampled_k(&out), 8);

    let f: CoresetFile = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(f.seed, 3);
    assert_eq!(f.solver, "uniform");
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sample]\nbudget = 5\n");
    let r = sevbench(&["--config", &cfg, "sample", "--vectors", "v", "--k", "1", "--out", "o"], &[]);
    assert_eq!(r.code, 2);
    let v: serde_json::Value = serde_json::from_str(r.stderr.trim()).unwrap();
    assert_eq!(v["error"]["kind"], "usage");
    assert!(v["error"]["message"].as_str().unwrap().contains("budget"));
}

#[test]
fn exit_codes() {
    assert_eq!(sevbench(&["--help"], &[]).code, 0);
    assert_eq!(sevbench(&["--version"], &[]).code, 0);
    assert_eq!(sevbench(&["sample", "--vectors", "v", "--out", "o"], &[]).code, 2);
    assert_eq!(sevbench(&["sample", "--vectors", "v", "--k", "0", "--out", "o"], &[]).code, 2);

    let r = sevbench(&["sample", "--vectors", "/nonexistent/v.bin", "--k", "1", "--out", "o"], &[]);
    assert_eq!(r.code, 1);
    assert_eq!(r.stderr.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(r.stderr.trim()).unwrap();
    assert!(v["error"]["kind"].is_string());
}

#[test]
fn tree_export_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tree.json");
    let p = path.to_str().unwrap();
    assert_eq!(sevbench(&["tree", "export", "--out", p], &[]).code, 0);
    let r = sevbench(&["tree", "validate", "--tree", p], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(!r.stdout.is_empty());
}
