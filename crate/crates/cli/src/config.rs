//! Run configurations. Every command writes its resolved configuration to
//! `config.json` next to its outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinn::model_selection::{DEFAULT_ALPHAS, DEFAULT_FOLDS, DEFAULT_HIDDEN, DEFAULT_LAMBDA0};
use spinn::simulation::ScenarioSpec;
use spinn::{Activation, PenaltyConfig, RateExperiment, Task, TrainConfig};

use crate::data::read_json;
use crate::error::{CliError, Result};

fn default_task() -> Task {
    Task::Regression
}

fn default_hidden() -> Vec<usize> {
    vec![10]
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

fn default_alphas() -> Vec<f64> {
    DEFAULT_ALPHAS.to_vec()
}

fn default_lambda0() -> f64 {
    DEFAULT_LAMBDA0
}

fn default_grid_hidden() -> Vec<Vec<usize>> {
    DEFAULT_HIDDEN.iter().map(|h| h.to_vec()).collect()
}

/// Cross-validation grid. Missing `lambdas` are filled with the default
/// log-spaced path before the run and recorded in the resolved config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_lambda0")]
    pub lambda0: f64,
    /// Hidden widths of each candidate architecture.
    #[serde(default = "default_grid_hidden")]
    pub hidden: Vec<Vec<usize>>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lambdas: None,
            alphas: default_alphas(),
            lambda0: default_lambda0(),
            hidden: default_grid_hidden(),
        }
    }
}

/// Configuration for `train` and `cv`.
///
/// Data comes either from `train_data` (CSV, last column is the response)
/// or from a simulated `scenario`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_task")]
    pub task: Task,
    #[serde(default)]
    pub train_data: Option<PathBuf>,
    #[serde(default)]
    pub test_data: Option<PathBuf>,
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default)]
    pub activation: Activation,
    /// Hidden widths used by `train`.
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Penalty used by `train`.
    #[serde(default)]
    pub penalty: Option<PenaltyConfig>,
    /// Grid used by `cv`.
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

fn absolute(base: &Path, path: &Path) -> Result<PathBuf> {
    let joined = base.join(path);
    std::path::absolute(&joined).map_err(|e| CliError::io(&joined, e))
}

impl RunConfig {
    /// Reads a config file; relative paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base)?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        if let Some(p) = &self.train_data {
            self.train_data = Some(absolute(base, p)?);
        }
        if let Some(p) = &self.test_data {
            self.test_data = Some(absolute(base, p)?);
        }
        self.output_dir = absolute(base, &self.output_dir)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.train_data, &self.scenario) {
            (None, None) => return Err(CliError::validation("config needs train_data or scenario")),
            (Some(_), Some(_)) => return Err(CliError::validation("config takes train_data or scenario, not both")),
            (None, Some(spec)) => {
                spec.validate()?;
                if self.task != Task::Regression {
                    return Err(CliError::validation("simulated scenarios are regression problems"));
                }
                if self.test_data.is_some() {
                    return Err(CliError::validation("test_data cannot be combined with a scenario"));
                }
            }
            _ => {}
        }
        self.train.validate()?;
        if let Some(p) = &self.penalty {
            p.validate()?;
        }
        Ok(())
    }
}

/// Configuration for `rates`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub experiment: RateExperiment,
    /// When set, skip fitting and summarize an exact power law
    /// `excess = (ln n / n)^exponent` over the grid.
    #[serde(default)]
    pub power_law: Option<f64>,
    pub output_dir: PathBuf,
}

/// Configuration for `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub scenario: ScenarioSpec,
    pub lasso_weights: Vec<f64>,
    pub group_weights: Vec<f64>,
    pub hidden: Vec<usize>,
    #[serde(default = "default_lambda0")]
    pub lambda0: f64,
    #[serde(default)]
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

/// Configuration for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: ScenarioSpec,
    pub output_dir: PathBuf,
}

/// Configuration for `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    pub model: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    /// Ignore the last column of `data`.
    #[serde(default)]
    pub has_response: bool,
}
