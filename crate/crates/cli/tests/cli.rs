use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::Array2;
use serde_json::{json, Value};
use spinn::simulation::{generate, ScenarioKind, ScenarioSpec};
use spinn::{predict, Task};
use spinn_cli::data::{read_dataset, read_features};
use spinn_cli::model::ModelFile;

fn spinn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinn"))
        .args(args)
        .env("SPINN_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn small_train() -> Value {
    json!({"max_iters": 300, "n_restarts": 2, "seed": 11})
}

fn simulate(dir: &Path) -> PathBuf {
    let cfg = write_config(
        dir,
        "sim.json",
        &json!({
            "scenario": {"kind": "teacher", "p": 8, "n_train": 60, "n_test": 40, "seed": 5},
            "output_dir": "sim"
        }),
    );
    ok(&spinn(&["simulate", "--config", cfg.to_str().unwrap()]));
    dir.join("sim")
}

#[test]
fn simulated_files_match_the_library_draws() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path());
    let expected = generate(&ScenarioSpec {
        n_test: 40,
        ..ScenarioSpec::new(ScenarioKind::TeacherNet, 8, 60, 5)
    })
    .unwrap();
    let train = read_dataset(&sim.join("train.csv"), Task::Regression).unwrap();
    let test = read_dataset(&sim.join("test.csv"), Task::Regression).unwrap();
    assert_eq!(train.features(), expected.train.features());
    assert_eq!(train.responses(), expected.train.responses());
    assert_eq!(test.features(), expected.test.features());
    assert_eq!(test.responses(), expected.test.responses());
    let meta: Value = serde_json::from_slice(&read(sim.join("metadata.json"))).unwrap();
    assert_eq!(meta["sigma"].as_f64().unwrap(), expected.sigma);
    assert_eq!(meta["relevant_features"], json!([0, 1, 2, 3, 4, 5]));
    assert!(sim.join("config.json").exists());
}

fn train_config(dir: &Path, out: &str) -> PathBuf {
    write_config(
        dir,
        &format!("{out}.json"),
        &json!({
            "train_data": "sim/train.csv",
            "test_data": "sim/test.csv",
            "hidden": [4],
            "penalty": {"lambda0": 0.001, "lambda": 0.02, "alpha": 0.5},
            "train": small_train(),
            "output_dir": out
        }),
    )
}

#[test]
fn training_is_byte_reproducible_and_predictions_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    for out in ["a", "b"] {
        let cfg = train_config(dir.path(), out);
        ok(&spinn(&["train", "--config", cfg.to_str().unwrap()]));
    }
    for file in ["model.json", "metrics.json"] {
        assert_eq!(read(dir.path().join("a").join(file)), read(dir.path().join("b").join(file)), "{file}");
    }
    let model_path = dir.path().join("a/model.json");
    let model = ModelFile::load(&model_path).unwrap();
    assert_eq!(model.to_json().into_bytes(), read(&model_path));

    let preds_path = dir.path().join("preds.csv");
    ok(&spinn(&[
        "predict",
        "--model",
        model_path.to_str().unwrap(),
        "--data",
        dir.path().join("sim/test.csv").to_str().unwrap(),
        "--out",
        preds_path.to_str().unwrap(),
        "--has-response",
    ]));
    let got = read_features(&preds_path, false).unwrap();
    let x = read_features(&dir.path().join("sim/test.csv"), true).unwrap();
    let want = predict(&model.params().unwrap(), &model.architecture, x.view()).unwrap();
    assert_eq!(got.column(0), want);
    assert!(dir.path().join("preds.config.json").exists());
}

#[test]
fn cv_reports_every_cell_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let cfg = |out: &str| {
        write_config(
            dir.path(),
            &format!("{out}.json"),
            &json!({
                "train_data": "sim/train.csv",
                "grid": {"lambdas": [0.003, 0.03], "alphas": [0.5], "hidden": [[3], [3, 2]]},
                "train": small_train(),
                "output_dir": out
            }),
        )
    };
    for out in ["a", "b"] {
        ok(&spinn(&["cv", "--config", cfg(out).to_str().unwrap()]));
    }
    for file in ["cv_report.csv", "cv_summary.json", "model.json", "metrics.json"] {
        assert_eq!(read(dir.path().join("a").join(file)), read(dir.path().join("b").join(file)), "{file}");
    }
    let report = String::from_utf8(read(dir.path().join("a/cv_report.csv"))).unwrap();
    assert_eq!(report.lines().count(), 1 + 4);
    assert!(report.lines().next().unwrap().ends_with("fold0_loss,fold1_loss,fold2_loss"));
    let resolved: Value = serde_json::from_slice(&read(dir.path().join("a/config.json"))).unwrap();
    assert_eq!(resolved["grid"]["lambda0"], json!(0.001));
}

#[test]
fn cv_fills_a_default_lambda_path() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let cfg = write_config(
        dir.path(),
        "cv.json",
        &json!({
            "train_data": "sim/train.csv",
            "grid": {"alphas": [1.0], "hidden": [[3]]},
            "folds": 2,
            "train": {"max_iters": 100, "n_restarts": 1, "seed": 1},
            "output_dir": "out"
        }),
    );
    ok(&spinn(&["cv", "--config", cfg.to_str().unwrap()]));
    let resolved: Value = serde_json::from_slice(&read(dir.path().join("out/config.json"))).unwrap();
    let lambdas: Vec<f64> = serde_json::from_value(resolved["grid"]["lambdas"].clone()).unwrap();
    assert_eq!(lambdas.len(), 10);
    assert!(lambdas.windows(2).all(|w| w[0] > w[1]));
    let ratio = lambdas[9] / lambdas[0];
    assert!((ratio - 1e-2).abs() < 1e-12, "{ratio}");
}

#[test]
fn power_law_rates_recover_the_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rates.json",
        &json!({
            "experiment": {
                "axis": "n",
                "grid": [100, 200, 400, 800, 1600],
                "base": {"kind": "teacher", "p": 10, "n_train": 0, "seed": 1},
                "hidden": [4],
                "lambda_rule": {"rule": "scaled", "scale": 0.07},
                "lambda0": 0.001,
                "alpha": 0.5,
                "train": {},
                "replicates": 5
            },
            "power_law": 1.03,
            "output_dir": "rates"
        }),
    );
    ok(&spinn(&["rates", "--config", cfg.to_str().unwrap()]));
    let summary: Value = serde_json::from_slice(&read(dir.path().join("rates/summary.json"))).unwrap();
    let fit = summary["fits"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["response"].as_str().unwrap().contains("excess"))
        .unwrap();
    let slope = fit["fit"]["coefficients"][1].as_f64().unwrap();
    assert!((slope - 1.03).abs() < 1e-9, "{slope}");
    let csv = String::from_utf8(read(dir.path().join("rates/rates.csv"))).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write_config(
        dir.path(),
        "missing.json",
        &json!({
            "train_data": "nope.csv",
            "penalty": {"lambda0": 0.001, "lambda": 0.1, "alpha": 0.5},
            "output_dir": "o"
        }),
    );
    let out = spinn(&["train", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));

    let bad = write_config(dir.path(), "bad.json", &json!({"output_dir": "o", "lamda": 1}));
    assert_eq!(spinn(&["train", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    std::fs::write(dir.path().join("nan.csv"), "x,y\n1,2\n3,nan\n").unwrap();
    let nan = write_config(
        dir.path(),
        "nan.json",
        &json!({
            "train_data": "nan.csv",
            "penalty": {"lambda0": 0.001, "lambda": 0.1, "alpha": 0.5},
            "output_dir": "o"
        }),
    );
    let out = spinn(&["train", "--config", nan.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3, column 2"));

    let model = dir.path().join("m.json");
    std::fs::write(&model, "{\"format_version\": 7}").unwrap();
    let out = spinn(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--data",
        dir.path().join("nan.csv").to_str().unwrap(),
        "--out",
        dir.path().join("p.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn predict_rejects_a_feature_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let cfg = train_config(dir.path(), "a");
    ok(&spinn(&["train", "--config", cfg.to_str().unwrap()]));
    let x = Array2::<f64>::zeros((3, 5));
    let path = dir.path().join("x.csv");
    std::fs::write(
        &path,
        x.outer_iter()
            .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("\n"),
    )
    .unwrap();
    let out = spinn(&[
        "predict",
        "--model",
        dir.path().join("a/model.json").to_str().unwrap(),
        "--data",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("p.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("expects 8"));
}
