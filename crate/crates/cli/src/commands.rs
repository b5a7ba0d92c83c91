//! Command implementations. Each command computes everything first and then
//! writes its outputs from a single thread.

use std::path::{Path, PathBuf};

use ndarray::Array1;
use serde::Serialize;
use spinn::model_selection::{cross_validate, feature_report, lambda_grid, CvReport, HyperGrid};
use spinn::network::empirical_loss;
use spinn::simulation::{
    alpha_sweep, excess_loss, generate, power_law_points, rate_experiment, signal_sd, summarize, RateExperimentResult,
    ScenarioData, SweepCell, Truth, CALIBRATION_DRAWS,
};
use spinn::{fit, predict, Dataset, FitResult, NetworkArchitecture, Task};

use crate::config::{PredictConfig, RatesConfig, RunConfig, SimulateConfig, SweepConfig};
use crate::data::{fmt_f64, read_dataset, read_features, write_csv, write_dataset, write_json};
use crate::error::{CliError, Result};
use crate::model::ModelFile;

pub const CONFIG_FILE: &str = "config.json";
pub const MODEL_FILE: &str = "model.json";
pub const METRICS_FILE: &str = "metrics.json";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

struct Inputs {
    train: Dataset,
    test: Option<Dataset>,
    truth: Option<Truth>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    cfg.validate()?;
    if let Some(spec) = &cfg.scenario {
        let ScenarioData { train, test, truth, .. } = generate(spec)?;
        return Ok(Inputs {
            train,
            test: Some(test),
            truth: Some(truth),
        });
    }
    let train = read_dataset(cfg.train_data.as_ref().expect("validated"), cfg.task)?;
    let test = match &cfg.test_data {
        Some(path) => {
            let test = read_dataset(path, cfg.task)?;
            if test.p() != train.p() {
                return Err(CliError::validation(format!(
                    "{}: test data has {} features, training data has {}",
                    path.display(),
                    test.p(),
                    train.p()
                )));
            }
            Some(test)
        }
        None => None,
    };
    Ok(Inputs { train, test, truth: None })
}

/// Summary of a fitted model written to `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub final_objective: f64,
    pub n_iters: usize,
    pub converged: bool,
    pub n_selected: usize,
    pub selected_features: Vec<usize>,
    pub n_active_hidden: usize,
    pub group_norms: Vec<f64>,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    /// Mean squared distance to the true function (simulated data only).
    pub excess_loss: Option<f64>,
    pub restart_objectives: Vec<Option<f64>>,
    pub objective_trace: Vec<f64>,
}

fn data_loss(fit: &FitResult, data: &Dataset) -> Result<f64> {
    let preds = fit.predict(data.features().view())?;
    Ok(empirical_loss(data.task(), data.responses().view(), preds.view()))
}

fn metrics(fit: &FitResult, inputs: &Inputs) -> Result<Metrics> {
    let test_loss = inputs.test.as_ref().map(|t| data_loss(fit, t)).transpose()?;
    let excess = match (&inputs.truth, &inputs.test) {
        (Some(truth), Some(test)) => Some(excess_loss(fit, truth, test.features().view())?),
        _ => None,
    };
    Ok(Metrics {
        final_objective: fit.final_objective(),
        n_iters: fit.n_iters,
        converged: fit.converged,
        n_selected: fit.selected_features.len(),
        selected_features: fit.selected_features.clone(),
        n_active_hidden: fit.n_active_hidden,
        group_norms: feature_report(&fit.params).group_norms,
        train_loss: data_loss(fit, &inputs.train)?,
        test_loss,
        excess_loss: excess,
        restart_objectives: fit.restart_objectives.clone(),
        objective_trace: fit.objective_trace.clone(),
    })
}

pub struct TrainOutput {
    pub model: ModelFile,
    pub metrics: Metrics,
}

/// Fits one network with the configured penalty.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutput> {
    let penalty = cfg
        .penalty
        .ok_or_else(|| CliError::validation("train needs a penalty (lambda0, lambda, alpha)"))?;
    let inputs = load_inputs(cfg)?;
    let arch = NetworkArchitecture::with_hidden(inputs.train.p(), &cfg.hidden, cfg.task, cfg.activation)?;
    let fitted = fit(&arch, &inputs.train, &penalty, &cfg.train)?;
    let out = TrainOutput {
        model: ModelFile::from_fit(&fitted, cfg.train.seed),
        metrics: metrics(&fitted, &inputs)?,
    };
    create_dir(&cfg.output_dir)?;
    out.model.save(&cfg.output_dir.join(MODEL_FILE))?;
    write_json(&cfg.output_dir.join(METRICS_FILE), &out.metrics)?;
    write_json(&cfg.output_dir.join(CONFIG_FILE), cfg)?;
    Ok(out)
}

/// Predictions for every row of `cfg.data`, in order.
pub fn cmd_predict(cfg: &PredictConfig) -> Result<Array1<f64>> {
    let model = ModelFile::load(&cfg.model)?;
    let params = model.params()?;
    let x = read_features(&cfg.data, cfg.has_response)?;
    let p = model.architecture.input_dim();
    if x.ncols() != p {
        return Err(CliError::validation(format!(
            "{}: model expects {p} feature columns, data has {}",
            cfg.data.display(),
            x.ncols()
        )));
    }
    let preds = predict(&params, &model.architecture, x.view())?;
    if let Some(dir) = cfg.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_csv(&cfg.out, &["prediction".to_string()], preds.iter().map(|&v| vec![fmt_f64(v)]))?;
    write_json(&predict_config_path(&cfg.out), cfg)?;
    Ok(preds)
}

/// `preds.csv` -> `preds.config.json`.
pub fn predict_config_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.config.json"))
}

fn hidden_label(arch: &NetworkArchitecture) -> String {
    arch.hidden_widths()
        .iter()
        .map(|w| w.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvSummary {
    pub folds: usize,
    pub lambda0: f64,
    pub best_lambda: f64,
    pub best_alpha: f64,
    pub best_hidden: Vec<usize>,
    pub best_mean_loss: f64,
    pub best_standard_error: f64,
    pub n_cells: usize,
    pub n_failed: usize,
}

pub struct CvOutput {
    pub report: CvReport,
    pub summary: CvSummary,
    pub model: ModelFile,
    pub resolved: RunConfig,
}

/// Cross-validates the configured grid and refits the best cell.
pub fn cmd_cv(cfg: &RunConfig) -> Result<CvOutput> {
    let inputs = load_inputs(cfg)?;
    let mut resolved = cfg.clone();
    let grid_cfg = resolved.grid.get_or_insert_with(Default::default);
    if grid_cfg.hidden.is_empty() {
        return Err(CliError::validation("grid needs at least one architecture"));
    }
    let architectures = grid_cfg
        .hidden
        .iter()
        .map(|h| NetworkArchitecture::with_hidden(inputs.train.p(), h, cfg.task, cfg.activation))
        .collect::<spinn::Result<Vec<_>>>()?;
    if grid_cfg.lambdas.is_none() {
        let lambdas = lambda_grid(&inputs.train, &architectures, &grid_cfg.alphas, grid_cfg.lambda0, &cfg.train)?;
        grid_cfg.lambdas = Some(lambdas);
    }
    let grid = HyperGrid {
        lambdas: grid_cfg.lambdas.clone().expect("filled above"),
        alphas: grid_cfg.alphas.clone(),
        lambda0: grid_cfg.lambda0,
        architectures,
    };
    let report = cross_validate(&inputs.train, &grid, cfg.folds, &cfg.train)?;
    let best = report.best_cell();
    let summary = CvSummary {
        folds: report.k,
        lambda0: report.lambda0,
        best_lambda: best.lambda,
        best_alpha: best.alpha,
        best_hidden: best.architecture.hidden_widths().to_vec(),
        best_mean_loss: best.mean_loss.expect("best cell succeeded"),
        best_standard_error: best.standard_error.expect("best cell succeeded"),
        n_cells: report.cells.len(),
        n_failed: report.cells.iter().filter(|c| c.failed()).count(),
    };
    let model = ModelFile::from_fit(&report.refit, cfg.train.seed);
    let refit_metrics = metrics(&report.refit, &inputs)?;

    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let mut header: Vec<String> = ["lambda", "alpha", "hidden", "mean_loss", "standard_error", "status"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..report.k).map(|f| format!("fold{f}_loss")));
    let rows = report.cells.iter().map(|c| {
        let mut row = vec![
            fmt_f64(c.lambda),
            fmt_f64(c.alpha),
            hidden_label(&c.architecture),
            c.mean_loss.map(fmt_f64).unwrap_or_default(),
            c.standard_error.map(fmt_f64).unwrap_or_default(),
            c.error.clone().unwrap_or_else(|| "ok".into()),
        ];
        row.extend((0..report.k).map(|f| c.fold_losses.get(f).map(|&v| fmt_f64(v)).unwrap_or_default()));
        row
    });
    write_csv(&dir.join("cv_report.csv"), &header, rows)?;
    write_json(&dir.join("cv_summary.json"), &summary)?;
    model.save(&dir.join(MODEL_FILE))?;
    write_json(&dir.join(METRICS_FILE), &refit_metrics)?;
    write_json(&dir.join(CONFIG_FILE), &resolved)?;
    Ok(CvOutput {
        report,
        summary,
        model,
        resolved,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationMetadata {
    pub scenario: String,
    pub p: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub snr: f64,
    pub sigma: f64,
    pub signal_sd: f64,
    pub sigma_rule: String,
    pub relevant_features: Vec<usize>,
}

/// Writes `train.csv`, `test.csv` and `metadata.json` for a scenario.
pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<SimulationMetadata> {
    let data = generate(&cfg.scenario)?;
    let spec = &cfg.scenario;
    let meta = SimulationMetadata {
        scenario: spec.kind.name().to_string(),
        p: spec.p,
        n_train: spec.n_train,
        n_test: spec.n_test,
        seed: spec.seed,
        snr: spec.snr,
        sigma: data.sigma,
        signal_sd: signal_sd(spec.kind),
        sigma_rule: format!("sigma = sd(f*(X)) / snr, sd from {CALIBRATION_DRAWS} fixed calibration draws"),
        relevant_features: data.relevant.clone(),
    };
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    write_dataset(&dir.join("train.csv"), data.train.features(), data.train.responses())?;
    write_dataset(&dir.join("test.csv"), data.test.features(), data.test.responses())?;
    write_json(&dir.join("metadata.json"), &meta)?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    Ok(meta)
}

/// Runs a rate experiment (or summarizes an injected power law).
pub fn cmd_rates(cfg: &RatesConfig) -> Result<RateExperimentResult> {
    let exp = &cfg.experiment;
    let result = match cfg.power_law {
        Some(exponent) => {
            exp.validate()?;
            summarize(exp.axis, 1, power_law_points(&exp.grid, exponent))
        }
        None => rate_experiment(exp)?,
    };
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let header: Vec<String> = [
        "value",
        "mean_excess",
        "se_excess",
        "mean_irrelevant",
        "se_irrelevant",
        "mean_selected",
        "lambda",
        "n_ok",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows = result.points.iter().map(|p| {
        vec![
            p.value.to_string(),
            fmt_f64(p.mean_excess),
            fmt_f64(p.se_excess),
            fmt_f64(p.mean_irrelevant),
            fmt_f64(p.se_irrelevant),
            fmt_f64(p.mean_selected),
            fmt_f64(p.lambda),
            p.n_ok.to_string(),
        ]
    });
    write_csv(&dir.join("rates.csv"), &header, rows)?;
    write_json(&dir.join("summary.json"), &result)?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    Ok(result)
}

/// Lasso / group lasso weight sweep on one simulated dataset.
pub fn cmd_sweep(cfg: &SweepConfig) -> Result<Vec<SweepCell>> {
    let cells = alpha_sweep(
        &cfg.lasso_weights,
        &cfg.group_weights,
        &cfg.scenario,
        &cfg.hidden,
        cfg.lambda0,
        &cfg.train,
    )?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let header: Vec<String> = [
        "lasso_weight",
        "group_weight",
        "lambda",
        "alpha",
        "mse",
        "relevant_share",
        "irrelevant_share",
        "empty",
        "n_selected",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows = cells.iter().map(|c| {
        vec![
            fmt_f64(c.lasso_weight),
            fmt_f64(c.group_weight),
            fmt_f64(c.lambda),
            fmt_f64(c.alpha),
            fmt_f64(c.mse),
            fmt_f64(c.relevant_share),
            fmt_f64(c.irrelevant_share),
            c.empty.to_string(),
            c.n_selected.to_string(),
        ]
    });
    write_csv(&dir.join("sweep.csv"), &header, rows)?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    Ok(cells)
}

/// Default task for a model file's architecture.
pub fn model_task(model: &ModelFile) -> Task {
    model.architecture.task()
}
