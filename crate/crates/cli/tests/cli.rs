// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rinorm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rinorm"))
        .args(args)
        .current_dir(dir)
        .env_remove("RINORM_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = r#"
name = "small"
lookback = 48
horizons = [12]
strategies = ["identity", "revin", "r2in", "ain"]
train_stride = 4
eval_stride = 4
seed = 7

[profile]
stride = 8

[train]
epochs = 3

[[datasets]]
name = "skew"
[datasets.scenario]
kind = "skewed"
length = 800
seed = 1

[[datasets]]
name = "file"
path = "series.csv"
"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = rinorm(&["gen", "heavy_tailed", "--length", "700", "--seed", "3", "--channels", "2", "-o", "series.csv"], dir.path());
    assert!(o.status.success(), "{o:?}");
    fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    dir
}

#[test]
fn gen_profile_recommend() {
    let dir = setup();
    let csv = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 701);
    let o = rinorm(&["profile", "series.csv", "--window", "96", "--stride", "8"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["avg_k_emp"].as_f64().unwrap() > 1.0);
    let o = rinorm(&["recommend", "series.csv", "--window", "96", "--stride", "8"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["recommendation"]["strategies"].is_array());
    assert_ne!(v["ain_original"], v["ain_reversed"]);
}

#[test]
fn gen_accepts_param_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen", "outlier_noise", "--length", "300", "--param", "spike_rate=0.5", "--param", "outage_every=0", "-o", "o.csv"];
    assert!(rinorm(&args, dir.path()).status.success());
    let o = rinorm(&["gen", "outlier_noise", "--param", "nonsense=1", "-o", "o.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_is_byte_identical() {
    let dir = setup();
    let a = rinorm(&["run", "exp.toml", "--output-dir", "a"], dir.path());
    assert!(a.status.success(), "{a:?}");
    let b = rinorm(&["run", "exp.toml", "--output-dir", "b", "--sequential"], dir.path());
    assert!(b.status.success(), "{b:?}");
    for f in ["report.json", "results.csv", "ranks.csv", "datasets.csv"] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        let y = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    assert!(stdout(&a).contains("average rank"));
}

#[test]
fn output_dir_comes_from_environment() {
    let dir = setup();
    let o = Command::new(env!("CARGO_BIN_EXE_rinorm"))
        .args(["run", "exp.toml"])
        .current_dir(dir.path())
        .env("RINORM_OUTPUT_DIR", "from_env")
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    assert!(dir.path().join("from_env/report.json").exists());
}

#[test]
fn ablate_writes_four_arms() {
    let dir = setup();
    let o = rinorm(&["ablate", "exp.toml", "--output-dir", "abl"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("abl/ablation.json")).unwrap()).unwrap();
    assert_eq!(v["report"]["rows"].as_array().unwrap().len(), 8);
}

#[test]
fn casestudy_runs_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
lookback = 96
horizon = 24
train_stride = 4
magnitude = 50.0
[scenario]
kind = "outlier_noise"
length = 1500
seed = 2
spike_rate = 0.0
idle_threshold = -2.0
outage_every = 0
[train]
epochs = 2
"#;
    fs::write(dir.path().join("cs.toml"), cfg).unwrap();
    let o = rinorm(&["casestudy", "--config", "cs.toml", "--output-dir", "cs"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("cs/case_study.json")).unwrap()).unwrap();
    assert_eq!(v["responses"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("cs/plot_data/case_study.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = setup();
    assert_eq!(rinorm(&["profile", "missing.csv"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), "lookbak = 3\n").unwrap();
    assert_eq!(rinorm(&["run", "bad.toml"], dir.path()).status.code(), Some(1));
    fs::write(dir.path().join("bad.csv"), "a,b\n1,2\n3,x\n").unwrap();
    let o = rinorm(&["profile", "bad.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    assert_eq!(rinorm(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(rinorm(&["--help"], dir.path()).status.code(), Some(0));
}
