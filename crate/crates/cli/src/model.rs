//! Versioned JSON model files.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use spinn::{FitResult, NetworkArchitecture, NetworkParameters, PenaltyConfig};

use crate::data::write_json;
use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingInfo {
    pub seed: u64,
    pub n_iters: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub best_restart: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub architecture: NetworkArchitecture,
    /// `weights[a][i][j]`: layer `a`, output unit `i`, input unit `j`.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub intercepts: Vec<Vec<f64>>,
    pub penalty: PenaltyConfig,
    pub training: TrainingInfo,
    pub selected_features: Vec<usize>,
}

impl ModelFile {
    pub fn from_fit(fit: &FitResult, seed: u64) -> Self {
        Self::from_params(
            &fit.arch,
            &fit.params,
            fit.penalty,
            TrainingInfo {
                seed,
                n_iters: fit.n_iters,
                converged: fit.converged,
                final_objective: fit.final_objective(),
                best_restart: fit.best_restart,
            },
        )
    }

    pub fn from_params(
        arch: &NetworkArchitecture,
        params: &NetworkParameters,
        penalty: PenaltyConfig,
        training: TrainingInfo,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            architecture: arch.clone(),
            weights: params
                .weights()
                .iter()
                .map(|w| w.outer_iter().map(|row| row.to_vec()).collect())
                .collect(),
            intercepts: params.intercepts().iter().map(|t| t.to_vec()).collect(),
            penalty,
            training,
            selected_features: params.selected_features(),
        }
    }

    pub fn params(&self) -> Result<NetworkParameters> {
        let weights = self
            .weights
            .iter()
            .enumerate()
            .map(|(a, rows)| {
                let ncols = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != ncols) {
                    return Err(CliError::validation(format!("model weights of layer {a} are ragged")));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Array2::from_shape_vec((rows.len(), ncols), flat)
                    .map_err(|e| CliError::validation(format!("layer {a}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let intercepts = self.intercepts.iter().map(|t| Array1::from(t.clone())).collect();
        let params = NetworkParameters::from_parts(&self.architecture, weights, intercepts)?;
        if !params.is_finite() {
            return Err(CliError::validation("model parameters contain non-finite values"));
        }
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("model serializes");
        text.push('\n');
        text
    }

    /// Parses a model, rejecting any format version other than the current one.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::validation(format!("model file: {e}")))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(CliError::validation(format!(
                    "model format version {v} is not supported (expected {FORMAT_VERSION})"
                )))
            }
            None => return Err(CliError::validation("model file has no format_version")),
        }
        let model: ModelFile =
            serde_json::from_value(value).map_err(|e| CliError::validation(format!("model file: {e}")))?;
        model.params()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Validation(msg) => CliError::Validation(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
