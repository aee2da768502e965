use std::path::Path;
use std::process::{Command, Output};

use video_dprp::formats::store_video;
use video_dprp::video::{FrameShape, VideoTensor};

fn dprp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dprp")).args(args).env_remove("DPRP_SEED").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_dataset(dir: &Path, n: usize) {
    let shape = FrameShape::new(8, 6, 3).unwrap();
    for i in 0..n {
        let v = VideoTensor::from_fn(4, shape, |t, x, y, c| ((t * 31 + x * 7 + y * 3 + c + i) % 256) as u8).unwrap();
        store_video(&v, &dir.join(format!("v{i}.vdt"))).unwrap();
    }
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&dprp(&["--help"])), 0);
    assert_eq!(code(&dprp(&["--version"])), 0);
    assert_eq!(code(&dprp(&["frobnicate"])), 2);
}

#[test]
fn transform_requires_epsilon() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path(), 1);
    let out = tmp.path().join("out");
    let o = dprp(&["transform", "--input", tmp.path().to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--epsilon is required"));
}

#[test]
fn transform_rejects_invalid_budget_and_empty_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = dprp(&["transform", "--input", tmp.path().to_str().unwrap(), "--output", out.to_str().unwrap(), "--epsilon", "2"]);
    assert_eq!(code(&o), 2);
    write_dataset(tmp.path(), 1);
    let o = dprp(&["transform", "--input", tmp.path().to_str().unwrap(), "--output", out.to_str().unwrap(), "--epsilon", "-1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn transform_is_deterministic_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    std::fs::create_dir(&input).unwrap();
    write_dataset(&input, 2);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = dprp(&[
            "transform", "--input", input.to_str().unwrap(), "--output", out.to_str().unwrap(),
            "--epsilon", "2", "--k", "16", "--seed", "9", "--parallelism", "2",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a");
    let b = run("b");
    for f in ["v0.vdt", "v1.vdt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("dprp-report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["config"]["k"], serde_json::json!([16]));
    let csv = std::fs::read_to_string(a.join("dprp-report.csv")).unwrap();
    assert!(csv.starts_with("# dprp "));
    assert_eq!(csv.lines().filter(|l| l.contains(".vdt")).count(), 2);
}

#[test]
fn corrupt_video_gives_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    std::fs::create_dir(&input).unwrap();
    write_dataset(&input, 1);
    std::fs::write(input.join("bad.vdt"), b"VDRPnonsense").unwrap();
    let out = tmp.path().join("out");
    let o = dprp(&["transform", "--input", input.to_str().unwrap(), "--output", out.to_str().unwrap(), "--epsilon", "2", "--k", "8"]);
    assert_eq!(code(&o), 1);
    assert!(out.join("v0.vdt").exists());
}

#[test]
fn seed_precedence_flag_file_env() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 5, "k": 4, "trials": 10000}"#).unwrap();
    let seed_of = |extra: &[&str], env: Option<&str>| {
        let report = tmp.path().join("r.json");
        let mut args = vec!["audit", "--check", "chi2", "--output", report.to_str().unwrap()];
        args.extend_from_slice(extra);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_dprp"));
        cmd.args(&args).env_remove("DPRP_SEED");
        if let Some(e) = env {
            cmd.env("DPRP_SEED", e);
        }
        let o = cmd.output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
        doc["config"]["seed"].as_u64().unwrap()
    };
    let c = cfg.to_str().unwrap();
    assert_eq!(seed_of(&[], None), 0);
    assert_eq!(seed_of(&[], Some("7")), 7);
    assert_eq!(seed_of(&["--config", c], Some("7")), 5);
    assert_eq!(seed_of(&["--config", c, "--seed", "3"], Some("7")), 3);
}

#[test]
fn unknown_config_key_is_invalid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"epsilom": 2}"#).unwrap();
    assert_eq!(code(&dprp(&["audit", "--check", "chi2", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn audit_selection_and_verdicts() {
    assert_eq!(code(&dprp(&["audit", "--check", "nope"])), 2);
    let o = dprp(&["audit", "--check", "chi2", "--k", "4", "--trials", "10000"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    let o = dprp(&["audit", "--check", "dp", "--zero-noise", "--trials", "10000"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_grid_and_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"epsilon": []}"#).unwrap();
    assert_eq!(code(&dprp(&["sweep", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&dprp(&["sweep", "--epsilon", "2", "--seeds", "0"])), 2);

    let csv = tmp.path().join("sweep.csv");
    let o = dprp(&[
        "sweep", "--epsilon", "8", "--k", "64", "--k", "256", "--k", "1024", "--seeds", "5", "--output", csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("sample,")).count(), 15);
    assert!(text.lines().any(|l| l.starts_with("verdict,k,") && l.ends_with("PASS")));
}

#[test]
fn bench_needs_three_values() {
    assert_eq!(code(&dprp(&["bench", "--axis", "k", "--values", "8,16"])), 2);
    assert_eq!(code(&dprp(&["bench", "--axis", "q"])), 2);
    let o = dprp(&["bench", "--axis", "k", "--values", "64,128,256", "--repeats", "1"]);
    assert!(code(&o) <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).lines().count() >= 4);
}
