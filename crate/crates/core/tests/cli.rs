use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const EXAMPLE_1: &str = r#"{
    "domain": {"kind": "circle", "cx": 6, "cy": 6, "r": 2},
    "regressors": [{"expr": "s^2+t^2"}, {"expr": "s+t"}, {"expr": "s*t"}],
    "model": {"kind": "wiener"},
    "rectangle": {"s_max": 8, "t_max": 8},
    "true_m": [5, 8, 3]
}"#;

fn sheetreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sheetreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn m_hat(path: &Path) -> Vec<f64> {
    json(path)["m_hat"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn domain_check_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let ok = config(tmp.path(), "ok.json", EXAMPLE_1);
    let out = sheetreg(&["domain-check", "--config", ok.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("valid"));

    let bad = config(tmp.path(), "bad.json", "{ \"domain\": ");
    assert_eq!(sheetreg(&["domain-check", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let off = config(tmp.path(), "off.json", &EXAMPLE_1.replace("\"cx\": 6, \"cy\": 6", "\"cx\": 1, \"cy\": 1"));
    let out = sheetreg(&["domain-check", "--config", off.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("positive quadrant"));

    let missing = tmp.path().join("nope.json");
    assert_eq!(sheetreg(&["domain-check", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(sheetreg(&["domain-check"]).status.code(), Some(2));
}

#[test]
fn fisher_writes_matrix_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "c.json", EXAMPLE_1);
    let out_dir = tmp.path().join("out");
    let out = sheetreg(&["fisher", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("condition number"));
    let a = json(&out_dir.join("fisher.json"))["fisher"].clone();
    assert!((a[0][0].as_f64().unwrap() - 339.0895).abs() < 5e-4);
    assert!((a[1][2].as_f64().unwrap() - 16.0).abs() < 5e-4);
    let csv = fs::read_to_string(out_dir.join("fisher.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let manifest = json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["command"], "fisher");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    for entry in manifest["outputs"].as_array().unwrap() {
        let file = out_dir.join(entry["file"].as_str().unwrap());
        assert_eq!(entry["sha256"], sheetreg::cli::sha256_file(&file).unwrap());
    }
}

#[test]
fn fisher_model_override() {
    let tmp = TempDir::new().unwrap();
    let text = EXAMPLE_1.replace("\"cx\": 6, \"cy\": 6, \"r\": 2", "\"cx\": 2, \"cy\": 2, \"r\": 1");
    let cfg = config(tmp.path(), "c.json", &text);
    let out_dir = tmp.path().join("out");
    let args = ["fisher", "--config", cfg.to_str().unwrap(), "--model", "ou-zero", "--out", out_dir.to_str().unwrap()];
    assert_eq!(sheetreg(&args).status.code(), Some(0));
    let v = json(&out_dir.join("fisher.json"));
    assert_eq!(v["model"]["kind"], "zero_start_ou");
    assert!((v["fisher"][0][0].as_f64().unwrap() - 1892.7035).abs() < 5e-3);
}

#[test]
fn duplicated_regressor_warns() {
    let tmp = TempDir::new().unwrap();
    let text = EXAMPLE_1.replace("{\"expr\": \"s*t\"}", "{\"expr\": \"s+t\"}");
    let cfg = config(tmp.path(), "c.json", &text);
    let out_dir = tmp.path().join("out");
    let out = sheetreg(&["fisher", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("condition number above"));
}

#[test]
fn estimate_noise_free_simulation_recovers_truth() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "c.json", EXAMPLE_1);
    let out_dir = tmp.path().join("out");
    let args = [
        "estimate", "--config", cfg.to_str().unwrap(), "--simulate", "11",
        "--noise-scale", "0", "--out", out_dir.to_str().unwrap(),
    ];
    assert_eq!(sheetreg(&args).status.code(), Some(0));
    for (got, want) in m_hat(&out_dir.join("estimate.json")).iter().zip([5.0, 8.0, 3.0]) {
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
}

#[test]
fn estimate_noisy_simulation_is_finite() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "c.json", EXAMPLE_1);
    let out_dir = tmp.path().join("out");
    let args = [
        "estimate", "--config", cfg.to_str().unwrap(), "--simulate", "11",
        "--n", "8", "--out", out_dir.to_str().unwrap(),
    ];
    assert_eq!(sheetreg(&args).status.code(), Some(0));
    let m = m_hat(&out_dir.join("estimate.json"));
    assert!(m.iter().all(|x| x.is_finite()));
    assert!(m.iter().zip([5.0, 8.0, 3.0]).any(|(a, b)| a != &b));
}

#[test]
fn estimate_from_grid_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "c.json", EXAMPLE_1);
    let grid_dir = tmp.path().join("grid");
    let args = [
        "simulate", "--config", cfg.to_str().unwrap(), "--noise-scale", "0",
        "--grid", "400", "--out", grid_dir.to_str().unwrap(),
    ];
    assert_eq!(sheetreg(&args).status.code(), Some(0));
    let field = grid_dir.join("field.csv");
    assert_eq!(fs::read_to_string(&field).unwrap().lines().count(), 400 * 400 + 1);

    let out_dir = tmp.path().join("est");
    let args = [
        "estimate", "--config", cfg.to_str().unwrap(), "--field", field.to_str().unwrap(),
        "--out", out_dir.to_str().unwrap(),
    ];
    let out = sheetreg(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for (got, want) in m_hat(&out_dir.join("estimate.json")).iter().zip([5.0, 8.0, 3.0]) {
        assert!((got - want).abs() < 1e-3, "{got} vs {want}");
    }
}

#[test]
fn estimate_missing_grid_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "c.json", EXAMPLE_1);
    let missing = tmp.path().join("none.csv");
    let args = ["estimate", "--config", cfg.to_str().unwrap(), "--field", missing.to_str().unwrap()];
    assert_eq!(sheetreg(&args).status.code(), Some(2));
    let args = ["estimate", "--config", cfg.to_str().unwrap()];
    assert_eq!(sheetreg(&args).status.code(), Some(2));
}

fn minimal_experiment(dir: &Path) -> PathBuf {
    let text = EXAMPLE_1.replace(
        "\"true_m\": [5, 8, 3]",
        "\"true_m\": [5, 8, 3], \"experiment\": {\"replications\": 2, \"n_sweep\": [4, 6]}",
    );
    config(dir, "exp.json", &text)
}

#[test]
fn minimal_experiment_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = minimal_experiment(tmp.path());
    let mut digests = Vec::new();
    for (run, workers) in [("a", "1"), ("b", "1")] {
        let out_dir = tmp.path().join(run);
        let args = [
            "experiment", "--config", cfg.to_str().unwrap(), "--seed", "5",
            "--workers", workers, "--out", out_dir.to_str().unwrap(),
        ];
        let out = sheetreg(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("band check"));
        let manifest = json(&out_dir.join("manifest.json"));
        assert_eq!(manifest["config"]["experiment"]["base_seed"], 5);
        let outputs = manifest["outputs"].as_array().unwrap().clone();
        assert_eq!(outputs.len(), 3);
        let result = json(&out_dir.join("result.json"));
        let cov = result["sweep"][1]["zeta_covariance"].as_array().unwrap();
        assert_eq!(cov.len(), 3);
        assert!(cov.iter().flat_map(|r| r.as_array().unwrap()).all(|x| x.as_f64().unwrap().is_finite()));
        digests.push(outputs);
    }
    assert_eq!(digests[0], digests[1]);
}
