//! Black-box tests of the command-line surface: exit codes, config parsing,
//! and the fit -> predict -> variance flow.

use std::path::Path;
use std::process::Command;

fn vstat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vstat"))
}

#[test]
fn missing_config_is_a_config_error() {
    let out = vstat().args(["simulate", "bias"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{
            "generator": {"kind": "csv", "path": "/nonexistent/data.csv", "task": "regression"},
            "n": 50, "k": 5, "b": 20, "mode": "with_replacement",
            "kernel": {"kind": "subsample_mean", "tree_params": null, "randomized": false, "positive_class": 0},
            "mc_reps": 20, "test_points": [[0.0]], "estimators": ["bm"], "seed": 1
        }"#,
    )
    .unwrap();
    let out = vstat()
        .args(["simulate", "bias", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{ not json").unwrap();
    let out = vstat()
        .args(["simulate", "bias", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(&path).unwrap();
            let config: vstat::experiments::ExperimentConfig =
                serde_json::from_str(&text).unwrap_or_else(|e| panic!("{path:?}: {e}"));
            config.validate().unwrap_or_else(|e| panic!("{path:?}: {e}"));
            seen += 1;
        }
    }
    assert!(seen >= 6, "expected shipped configs, found {seen}");
}

#[test]
fn fit_predict_variance_flow() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fit.json");
    std::fs::write(
        &cfg,
        r#"{
            "generator": {"kind": "linear"},
            "n": 100, "k": 20, "b": 50, "mode": "balanced_v",
            "kernel": {"kind": "regression_tree", "tree_params": {"mtry": null, "min_samples_split": 2, "max_depth": null}, "randomized": true, "positive_class": 0},
            "mc_reps": 20, "test_points": [[10.0]], "estimators": ["bm"], "seed": 99
        }"#,
    )
    .unwrap();
    let model = dir.path().join("model.json");
    let out = vstat()
        .args([
            "fit",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            model.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(model.exists());

    let pcfg = dir.path().join("predict.json");
    std::fs::write(
        &pcfg,
        format!(
            r#"{{ "model": {model:?}, "points": [[10.0], [5.0]] }}"#,
            model = model.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = vstat()
        .args(["predict", "--config", pcfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let preds: Vec<f64> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(preds.len(), 2);
    // E[Y | X = 10] = 20, E[Y | X = 5] = 10; trees should be in the ballpark
    assert!((preds[0] - 20.0).abs() < 4.0, "prediction at 10 was {}", preds[0]);
    assert!(preds[0] > preds[1]);

    let vcfg = dir.path().join("variance.json");
    std::fs::write(
        &vcfg,
        format!(
            r#"{{ "model": {model:?}, "points": [[10.0]], "estimators": ["bm", "ij", "corrected_v"] }}"#,
            model = model.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = vstat()
        .args(["variance", "--config", vcfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report[0]["estimates"].as_array().unwrap().len(), 3);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{
            "generator": {"kind": "linear"},
            "n": 40, "k": 8, "b": 20, "mode": "balanced_v",
            "kernel": {"kind": "subsample_mean", "tree_params": null, "randomized": false, "positive_class": 0},
            "mc_reps": 20, "test_points": [[10.0]], "estimators": ["bm"], "seed": 1
        }"#,
    )
    .unwrap();
    let run = |extra: &[&str], tag: &str| {
        let out = dir.path().join(format!("r{tag}.json"));
        let mut args = vec![
            "simulate",
            "bias",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        assert!(vstat().args(&args).status().unwrap().success());
        std::fs::read(&out).unwrap()
    };
    let base = run(&[], "a");
    let same = run(&[], "b");
    let other = run(&["--seed", "2"], "c");
    assert_eq!(base, same);
    assert_ne!(base, other);
}
