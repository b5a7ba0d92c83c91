//! K-fold cross-validation over penalty and architecture grids.

use std::cmp::Ordering;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinnError};
use crate::network::{empirical_loss, Dataset, NetworkArchitecture, NetworkParameters, Task};
use crate::optimizer::{fit, FitResult, TrainConfig};
use crate::penalty::PenaltyConfig;
use crate::seed;
use crate::stats;

pub const DEFAULT_FOLDS: usize = 3;
pub const DEFAULT_LAMBDA0: f64 = 0.001;
pub const DEFAULT_ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_HIDDEN: [&[usize]; 3] = [&[5], &[10], &[10, 5]];
pub const DEFAULT_GRID_SIZE: usize = 10;
pub const DEFAULT_GRID_RATIO: f64 = 1e-2;
const BISECTION_STEPS: usize = 20;

// stream ids below the fold range are never reused
const SPLIT_STREAM: u64 = 0x5B11_7000;
const REFIT_STREAM: u64 = 0xF17_0000;

/// Values tried by cross-validation. `lambda0` stays fixed across the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub lambda0: f64,
    pub architectures: Vec<NetworkArchitecture>,
}

impl HyperGrid {
    /// Default alphas, `lambda0` and architectures for `p` inputs.
    pub fn with_defaults(lambdas: Vec<f64>, p: usize, task: Task) -> Result<Self> {
        let architectures = DEFAULT_HIDDEN
            .iter()
            .map(|h| NetworkArchitecture::with_hidden(p, h, task, Default::default()))
            .collect::<Result<Vec<_>>>()?;
        let grid = Self {
            lambdas,
            alphas: DEFAULT_ALPHAS.to_vec(),
            lambda0: DEFAULT_LAMBDA0,
            architectures,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.alphas.is_empty() || self.architectures.is_empty() {
            return Err(SpinnError::invalid("grid needs at least one lambda, alpha and architecture"));
        }
        for &lambda in &self.lambdas {
            for &alpha in &self.alphas {
                PenaltyConfig::new(self.lambda0, lambda, alpha)?;
            }
        }
        let first = &self.architectures[0];
        if self
            .architectures
            .iter()
            .any(|a| a.input_dim() != first.input_dim() || a.task() != first.task())
        {
            return Err(SpinnError::invalid("architectures must share input dimension and task"));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.lambdas.len() * self.alphas.len() * self.architectures.len()
    }

    /// Cells in lambda-major order.
    pub fn cells(&self) -> Vec<(f64, f64, &NetworkArchitecture)> {
        let mut out = Vec::with_capacity(self.n_cells());
        for &lambda in &self.lambdas {
            for &alpha in &self.alphas {
                for arch in &self.architectures {
                    out.push((lambda, alpha, arch));
                }
            }
        }
        out
    }
}

/// One train / validation split. Both index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Shuffles `0..n` and cuts it into `k` folds whose sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(SpinnError::invalid(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(SpinnError::invalid(format!("cannot split {n} rows into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut validation = order[start..start + size].to_vec();
        validation.sort_unstable();
        let mut in_fold = vec![false; n];
        for &i in &validation {
            in_fold[i] = true;
        }
        let train = (0..n).filter(|&i| !in_fold[i]).collect();
        folds.push(Fold { train, validation });
        start += size;
    }
    Ok(folds)
}

/// Cross-validation outcome for one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub lambda: f64,
    pub alpha: f64,
    pub architecture: NetworkArchitecture,
    /// Validation loss per fold; empty when the cell failed.
    pub fold_losses: Vec<f64>,
    pub mean_loss: Option<f64>,
    pub standard_error: Option<f64>,
    pub error: Option<String>,
}

impl CellResult {
    pub fn failed(&self) -> bool {
        self.mean_loss.is_none()
    }

    pub fn penalty(&self, lambda0: f64) -> PenaltyConfig {
        PenaltyConfig {
            lambda0,
            lambda: self.lambda,
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub k: usize,
    pub lambda0: f64,
    pub folds: Vec<Fold>,
    pub cells: Vec<CellResult>,
    /// Index into `cells`.
    pub best: usize,
    pub refit: FitResult,
}

impl CvReport {
    pub fn best_cell(&self) -> &CellResult {
        &self.cells[self.best]
    }
}

/// Validation loss of `params` on the rows `indices` of `data`.
pub fn validation_loss(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    data: &Dataset,
    indices: &[usize],
) -> Result<f64> {
    let x = data.features().select(Axis(0), indices);
    let y = data.responses().select(Axis(0), indices);
    let preds = crate::network::predict(params, arch, x.view())?;
    Ok(empirical_loss(data.task(), y.view(), preds.view()))
}

fn fold_config(config: &TrainConfig, fold: usize) -> TrainConfig {
    config.with_seed(seed::derive(config.seed, fold as u64))
}

/// `Less` when cell `a` should be preferred over `b`: lower mean loss, then
/// larger lambda, smaller architecture, larger alpha.
fn preference(a: &CellResult, b: &CellResult) -> Ordering {
    let (la, lb) = (a.mean_loss.unwrap_or(f64::INFINITY), b.mean_loss.unwrap_or(f64::INFINITY));
    la.total_cmp(&lb)
        .then(b.lambda.total_cmp(&a.lambda))
        .then(a.architecture.size_key().cmp(&b.architecture.size_key()))
        .then(b.alpha.total_cmp(&a.alpha))
}

/// Fits every grid cell on every training fold, scores the held-out fold and
/// refits the best cell on all of `data`.
///
/// Fold `f` of every cell uses the same split and the same restart seeds, so
/// the report does not depend on the order of the grid.
pub fn cross_validate(data: &Dataset, grid: &HyperGrid, k: usize, config: &TrainConfig) -> Result<CvReport> {
    grid.validate()?;
    config.validate()?;
    let arch0 = &grid.architectures[0];
    if arch0.input_dim() != data.p() || arch0.task() != data.task() {
        return Err(SpinnError::shape(format!(
            "grid expects {} features ({:?}), data has {} ({:?})",
            arch0.input_dim(),
            arch0.task(),
            data.p(),
            data.task()
        )));
    }
    let folds = kfold_split(data.n(), k, seed::derive(config.seed, SPLIT_STREAM))?;
    let fold_data: Vec<Dataset> = folds.iter().map(|f| data.subset(&f.train)).collect();
    let cells = grid.cells();

    let units: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..k).map(move |f| (c, f))).collect();
    let losses: Vec<Result<f64>> = units
        .par_iter()
        .map(|&(c, f)| {
            let (lambda, alpha, arch) = cells[c];
            let penalty = PenaltyConfig::new(grid.lambda0, lambda, alpha)?;
            let fitted = fit(arch, &fold_data[f], &penalty, &fold_config(config, f))?;
            validation_loss(&fitted.params, arch, data, &folds[f].validation)
        })
        .collect();

    let mut results = Vec::with_capacity(cells.len());
    for (c, chunk) in losses.chunks(k).enumerate() {
        let (lambda, alpha, arch) = cells[c];
        let mut cell = CellResult {
            lambda,
            alpha,
            architecture: arch.clone(),
            fold_losses: Vec::new(),
            mean_loss: None,
            standard_error: None,
            error: None,
        };
        match chunk.iter().cloned().collect::<Result<Vec<f64>>>() {
            Ok(fold_losses) if fold_losses.iter().all(|v| v.is_finite()) => {
                cell.mean_loss = Some(stats::mean(&fold_losses));
                cell.standard_error = Some(stats::standard_error(&fold_losses));
                cell.fold_losses = fold_losses;
            }
            Ok(_) => cell.error = Some("non-finite validation loss".into()),
            Err(e) => cell.error = Some(e.to_string()),
        }
        results.push(cell);
    }

    let best = (0..results.len())
        .filter(|&i| !results[i].failed())
        .min_by(|&a, &b| preference(&results[a], &results[b]).then(a.cmp(&b)))
        .ok_or_else(|| {
            SpinnError::Fit(format!(
                "all {} grid cells failed; first error: {}",
                results.len(),
                results[0].error.as_deref().unwrap_or("unknown")
            ))
        })?;

    let chosen = &results[best];
    let refit = fit(
        &chosen.architecture,
        data,
        &chosen.penalty(grid.lambda0),
        &config.with_seed(seed::derive(config.seed, REFIT_STREAM)),
    )?;
    Ok(CvReport {
        k,
        lambda0: grid.lambda0,
        folds,
        cells: results,
        best,
        refit,
    })
}

/// Which inputs a fitted network uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    /// 0-based indices of columns with a nonzero first-layer norm.
    pub included: Vec<usize>,
    pub count: usize,
    /// Euclidean norm of every first-layer column.
    pub group_norms: Vec<f64>,
}

pub fn feature_report(params: &NetworkParameters) -> FeatureReport {
    let group_norms: Vec<f64> = params
        .first_layer()
        .axis_iter(Axis(1))
        .map(|c| c.dot(&c).sqrt())
        .collect();
    let included: Vec<usize> = (0..group_norms.len()).filter(|&j| group_norms[j] > 0.0).collect();
    FeatureReport {
        count: included.len(),
        included,
        group_norms,
    }
}

/// Smallest lambda (to bisection precision) whose full-data fit selects no
/// feature, for the given architecture and alpha.
pub fn lambda_max(
    data: &Dataset,
    arch: &NetworkArchitecture,
    lambda0: f64,
    alpha: f64,
    config: &TrainConfig,
) -> Result<f64> {
    let empty = |lambda: f64| -> Result<bool> {
        let f = fit(arch, data, &PenaltyConfig::new(lambda0, lambda, alpha)?, config)?;
        Ok(f.selected_features.is_empty())
    };
    let mut hi = 1.0;
    let mut lo = 0.0;
    let mut doublings = 0;
    while !empty(hi)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(SpinnError::Fit("no lambda up to 2^60 removes every feature".into()));
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if empty(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `size` values log-spaced from `max` down to `max * ratio`, largest first.
pub fn log_spaced(max: f64, ratio: f64, size: usize) -> Vec<f64> {
    if size == 1 {
        return vec![max];
    }
    (0..size)
        .map(|i| max * ratio.powf(i as f64 / (size - 1) as f64))
        .collect()
}

/// Default lambda grid: `DEFAULT_GRID_SIZE` values from `lambda_max` (found
/// at the largest alpha of `alphas` and the first architecture) down by a
/// factor of 100.
pub fn lambda_grid(
    data: &Dataset,
    architectures: &[NetworkArchitecture],
    alphas: &[f64],
    lambda0: f64,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    let arch = architectures
        .first()
        .ok_or_else(|| SpinnError::invalid("no architecture given"))?;
    let alpha = alphas
        .iter()
        .copied()
        .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.max(a))))
        .ok_or_else(|| SpinnError::invalid("no alpha given"))?;
    let max = lambda_max(data, arch, lambda0, alpha, config)?;
    Ok(log_spaced(max, DEFAULT_GRID_RATIO, DEFAULT_GRID_SIZE))
}
