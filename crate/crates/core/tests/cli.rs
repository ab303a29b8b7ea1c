//! End-to-end runs of the `fracbridge` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fracbridge::estimator::alpha_hat_from_samples;

fn fracbridge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracbridge"))
        .args(args)
        .env("FRACBRIDGE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, out_dir: &Path, overrides: &[(&str, serde_json::Value)]) -> String {
    let mut v = serde_json::json!({
        "hurst": 0.7,
        "alpha": 0.1,
        "horizon": 1.0,
        "grid_n": 1024,
        "ladder_epsilons": [0.1, 0.05, 0.02],
        "replications": 3,
        "seed": 17,
        "sampler": "davies_harte",
        "checks": ["ks_cauchy"],
        "out_dir": out_dir,
    });
    for (k, val) in overrides {
        if val.is_null() {
            v.as_object_mut().unwrap().remove(*k);
        } else {
            v[*k] = val.clone();
        }
    }
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn constants_reports_regime_data() {
    let o = fracbridge(&["constants", "--alpha", "0.5", "--hurst", "0.7"]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["regime"], "R4_as_half");
    assert_eq!(v["as_limit"], 0.5);

    let v = stdout_json(&fracbridge(&["constants", "--alpha", "0.8", "--hurst", "0.7"]));
    assert_eq!(v["regime"], "NC_half");
    assert!(v["note"].as_str().unwrap().contains("no rate"));

    let v = stdout_json(&fracbridge(&["constants", "--alpha", "0.25", "--hurst", "0.5"]));
    assert!((v["cauchy_scale"].as_f64().unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn constants_domain_error_exits_two() {
    let o = fracbridge(&["constants", "--alpha", "0.3", "--hurst", "0.4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());
}

#[test]
fn simulate_writes_full_paths_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &out, &[]);
    let o = fracbridge(&["simulate", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let first = fs::read_to_string(out.join("paths/rep_00000.csv")).unwrap();
    assert!(first.starts_with("t,B,xi,eta,X\n"));
    let data = rows(&first);
    assert_eq!(data.len(), 1025);
    assert!(data.iter().all(|r| r.len() == 5 && r.iter().all(|x| x.is_finite())));
    assert_eq!(data[0][0], 0.0);
    assert!(out.join("paths/rep_00002.csv").exists());
    assert!(out.join("plot/rep_00002.dat").exists());

    let o = fracbridge(&["simulate", &cfg]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("paths/rep_00000.csv")).unwrap(), first);
}

#[test]
fn zero_drift_bridge_is_the_driving_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &out, &[("alpha", 0.0.into()), ("replications", 1.into())]);
    assert!(fracbridge(&["simulate", &cfg]).status.success());
    let data = rows(&fs::read_to_string(out.join("paths/rep_00000.csv")).unwrap());
    for r in data {
        assert!((r[4] - r[1]).abs() <= 1e-12 * (1.0 + r[1].abs()), "{r:?}");
    }
}

#[test]
fn estimates_recompute_from_written_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &out, &[]);
    assert!(fracbridge(&["simulate", &cfg]).status.success());
    let paths = rows(&fs::read_to_string(out.join("paths/rep_00001.csv")).unwrap());
    let times: Vec<f64> = paths.iter().map(|r| r[0]).collect();
    let x: Vec<f64> = paths.iter().map(|r| r[4]).collect();

    let o = fracbridge(&["estimate", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let estimates = rows(&fs::read_to_string(out.join("estimates.csv")).unwrap());
    assert_eq!(estimates.len(), 3 * 3);
    let mine: Vec<&Vec<f64>> = estimates.iter().filter(|r| r[0] == 1.0).collect();
    assert_eq!(mine.len(), 3);
    for r in mine {
        let upto = times.iter().position(|&t| t == r[3]).expect("ladder time is a grid node");
        let recomputed = alpha_hat_from_samples(&times, &x, 1.0, upto).unwrap();
        assert!((recomputed - r[4]).abs() < 1e-12, "{recomputed} vs {}", r[4]);
    }
}

#[test]
fn missing_key_exits_two_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &dir.path().join("out"), &[("grid_n", serde_json::Value::Null)]);
    let o = fracbridge(&["estimate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid_n"));
}

#[test]
fn unknown_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &dir.path().join("out"), &[("colour", "red".into())]);
    let o = fracbridge(&["simulate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn verify_writes_summary_and_flags_a_wrong_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &out,
        &[
            ("grid_n", 16384.into()),
            ("ladder_epsilons", serde_json::json!([0.01])),
            ("replications", 400.into()),
        ],
    );
    let o = fracbridge(&["verify", &cfg]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["regime"], "R1_cauchy");
    assert_eq!(summary["replications"], 400);
    assert_eq!(summary["checks"][0]["name"], "ks_cauchy");
    assert!(out.join("estimates.csv").exists());

    let o = fracbridge(&["verify", &cfg, "--scale-multiplier", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ks_cauchy     FAIL"));
}

#[test]
fn verify_rejects_too_few_replications() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &dir.path().join("out"), &[]);
    let o = fracbridge(&["verify", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replications"));
}
