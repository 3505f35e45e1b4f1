use std::fs;
use std::path::Path;
use std::process::Command;

use sifbm::config::ExperimentConfig;
use sifbm::format::read_sifb;

const BIN: &str = env!("CARGO_BIN_EXE_sifbm");

fn config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let text = format!(
        r#"{{
  "dimension": 2,
  "hurst": 0.3,
  "samples": 1500,
  "seed": 7,
  "indices": {{ "lattice": [[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]] }},
  "battery": {{ "standard": {{ "points": 12 }} }},
  "intrep": {{ "samples": 2000 }},
  "output": {:?}{extra}
}}"#,
        dir.join("out")
    );
    let p = dir.join(format!("config{}.json", extra.len()));
    fs::write(&p, text).unwrap();
    p
}

fn sifbm(args: &[&str], cfg: &Path) -> (i32, String) {
    let out = Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(cfg)
        .env_remove("SIFBM_OUT")
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn simulate_then_characterize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let out = dir.path().join("out");
    assert_eq!(sifbm(&["simulate"], &cfg).0, 0);
    let first = fs::read(out.join("ensemble.sifb")).unwrap();
    let csv = fs::read(out.join("ensemble.csv")).unwrap();
    assert_eq!(sifbm(&["simulate"], &cfg).0, 0);
    assert_eq!(fs::read(out.join("ensemble.sifb")).unwrap(), first);
    assert_eq!(fs::read(out.join("ensemble.csv")).unwrap(), csv);
    let e = read_sifb(first.as_slice()).unwrap();
    assert_eq!(e.n_samples(), 1500);
    assert_eq!(e.seed(), Some(7));

    for cmd in ["project", "recover-measure", "characterize", "report"] {
        assert_eq!(sifbm(&[cmd], &cfg).0, 0, "{cmd}");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], true);
    let profile = fs::read_to_string(out.join("flow0_profile.csv")).unwrap();
    assert!(profile.starts_with("s,t,θ_s,θ_t,predicted,observed,stderr\n"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("simulate.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["artifacts"][0], "ensemble.sifb");

    let shifted = config(dir.path(), r#", "characterize_hurst": 0.45"#);
    let (code, _) = sifbm(&["characterize"], &shifted);
    assert_eq!(code, 2);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    let failed: Vec<_> = report["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["criterion"].as_str().unwrap().to_string())
        .collect();
    assert!(failed.contains(&"VarianceProfile".to_string()), "{failed:?}");
    assert_eq!(sifbm(&["report"], &shifted).0, 2);
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    assert_eq!(sifbm(&["nonsense"], &cfg).0, 1);
    let (code, err) = sifbm(&["characterize"], &cfg);
    assert_eq!(code, 1);
    assert!(err.contains("ensemble.sifb"), "{err}");

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"dimension": 2, "hurst": 0.75, "samples": 10, "seed": 1}"#).unwrap();
    let (code, err) = sifbm(&["simulate"], &bad);
    assert_eq!(code, 1);
    assert!(err.contains("hurst"), "{err}");
    fs::write(&bad, r#"{"dimension": 2, "hurst": 0.3, "samples": 10, "seed": 1, "colour": 3}"#).unwrap();
    assert!(sifbm(&["simulate"], &bad).1.contains("colour"));
    fs::write(&bad, r#"{"dimension": 2, "hurst": 0.3, "samples": 10, "seed": 1, "indices": {"explicit": [[1.0]]}}"#)
        .unwrap();
    assert!(sifbm(&["simulate"], &bad).1.contains("indices[0]"));
}

#[test]
fn seed_flag_and_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let alt = dir.path().join("alt");
    let status = Command::new(BIN)
        .args(["simulate", "--seed", "11", "--config"])
        .arg(&cfg)
        .env("SIFBM_OUT", &alt)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let e = read_sifb(fs::read(alt.join("ensemble.sifb")).unwrap().as_slice()).unwrap();
    assert_eq!(e.seed(), Some(11));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn verify_intrep_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    assert_eq!(sifbm(&["verify-intrep"], &cfg).0, 0);
    let r: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/intrep.json")).unwrap()).unwrap();
    assert_eq!(r["passed"], true);
    assert!(r["refinement"]["refined_max_error"].as_f64() < r["refinement"]["max_error"].as_f64());
}

#[test]
fn config_hash_tracks_every_field() {
    let base: ExperimentConfig =
        ExperimentConfig::parse(r#"{"dimension": 2, "hurst": 0.3, "samples": 10, "seed": 1}"#).unwrap();
    let same = ExperimentConfig::parse(r#"{"seed": 1, "samples": 10, "hurst": 0.3, "dimension": 2}"#).unwrap();
    assert_eq!(base.hash(), same.hash());
    let mut other = base.clone();
    other.seed = 2;
    assert_ne!(base.hash(), other.hash());
    let mut other = base.clone();
    other.thresholds.profile_sigma = 5.0;
    assert_ne!(base.hash(), other.hash());
    let mut other = base.clone();
    other.intrep.grid.steps = 100;
    assert_ne!(base.hash(), other.hash());
}
