//! Proximal gradient descent with a monotone backtracking line search.
//!
//! Each iteration takes a gradient step on the smooth loss for every
//! parameter, applies the sparse group lasso proximal map to the first-layer
//! weights, and accepts the step size `gamma` only if
//! `F(new) <= F(old) - t * gamma * ||new - old||^2`. Rejected steps shrink
//! `gamma` by `shrink`. Upper layers keep their plain gradient-stepped values.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinnError};
use crate::network::{
    predict, smooth_loss_and_gradient, Dataset, Gradient, NetworkArchitecture, NetworkParameters,
};
use crate::penalty::{full_objective, sgl_prox_inplace, PenaltyConfig};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Step size tried first at every iteration.
    pub gamma_init: f64,
    /// Factor applied to the step size after a rejected trial.
    pub shrink: f64,
    /// Sufficient-decrease constant of the line search.
    pub line_search_t: f64,
    pub max_iters: usize,
    /// Stop once an accepted step and a confirming step at the same size both
    /// change the objective by less than this, relative to its value.
    pub rel_tol: f64,
    pub max_backtracks: usize,
    pub n_restarts: usize,
    pub seed: u64,
    /// Half-width of the uniform weight initialization. `None` uses
    /// `0.5 / sqrt(fan_in)` per layer.
    pub init_scale: Option<f64>,
    /// Iterate on column-centered inputs and shift the first-layer intercepts
    /// back afterwards. The objective is unchanged because intercepts are not
    /// penalized; the iterates are better conditioned.
    pub center_inputs: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma_init: 1.0,
            shrink: 0.5,
            line_search_t: 0.1,
            max_iters: 5000,
            rel_tol: 1e-6,
            max_backtracks: 50,
            n_restarts: 3,
            seed: 0,
            init_scale: None,
            center_inputs: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_init > 0.0 && self.gamma_init.is_finite()) {
            return Err(SpinnError::invalid(format!("gamma_init must be > 0, got {}", self.gamma_init)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(SpinnError::invalid(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if !(self.line_search_t > 0.0 && self.line_search_t < 1.0) {
            return Err(SpinnError::invalid(format!(
                "line_search_t must lie in (0, 1), got {}",
                self.line_search_t
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(SpinnError::invalid(format!("rel_tol must be > 0, got {}", self.rel_tol)));
        }
        if self.max_iters == 0 || self.max_backtracks == 0 || self.n_restarts == 0 {
            return Err(SpinnError::invalid(
                "max_iters, max_backtracks and n_restarts must be positive",
            ));
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(SpinnError::invalid(format!("init_scale must be > 0, got {s}")));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub arch: NetworkArchitecture,
    pub penalty: PenaltyConfig,
    pub params: NetworkParameters,
    /// Objective at the initial point followed by one entry per accepted iteration.
    pub objective_trace: Vec<f64>,
    pub n_iters: usize,
    pub converged: bool,
    /// Features whose first-layer column is not identically zero, ascending.
    pub selected_features: Vec<usize>,
    pub n_active_hidden: usize,
    /// Final objective of every restart, `None` for restarts that failed.
    pub restart_objectives: Vec<Option<f64>>,
    pub best_restart: usize,
    /// Step size of the last accepted iteration.
    pub final_gamma: f64,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        predict(&self.params, &self.arch, x)
    }
}

/// Draws weights uniformly on `[-s, s]` and sets intercepts to zero.
pub fn initialize<R: Rng>(arch: &NetworkArchitecture, init_scale: Option<f64>, rng: &mut R) -> NetworkParameters {
    let mut params = NetworkParameters::zeros(arch);
    for w in params.weights_mut() {
        let fan_in = w.ncols() as f64;
        let s = init_scale.unwrap_or(0.5 / fan_in.sqrt());
        w.mapv_inplace(|_| rng.random_range(-s..=s));
    }
    params
}

/// Gradient step on every parameter followed by the proximal map on the first layer.
pub fn proximal_step(
    params: &NetworkParameters,
    grad: &Gradient,
    gamma: f64,
    penalty: &PenaltyConfig,
) -> NetworkParameters {
    let mut next = params.stepped(grad, gamma);
    sgl_prox_inplace(next.first_layer_mut(), gamma, penalty.lambda, penalty.alpha);
    next
}

/// One proximal gradient update at step size `gamma`.
pub fn gist_step(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    data: &Dataset,
    penalty: &PenaltyConfig,
    gamma: f64,
) -> Result<NetworkParameters> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(SpinnError::invalid(format!("step size must be > 0, got {gamma}")));
    }
    penalty.validate()?;
    let (_, grad) = smooth_loss_and_gradient(params, arch, data, penalty.lambda0)?;
    Ok(proximal_step(params, &grad, gamma, penalty))
}

/// Monotone sufficient-decrease test.
pub fn line_search_accept(
    obj_new: f64,
    obj_old: f64,
    params_new: &NetworkParameters,
    params_old: &NetworkParameters,
    gamma: f64,
    t: f64,
) -> bool {
    obj_new <= obj_old - t * gamma * params_new.squared_distance(params_old)
}

struct RestartRun {
    params: NetworkParameters,
    trace: Vec<f64>,
    converged: bool,
    final_gamma: f64,
}

fn run_restart(
    arch: &NetworkArchitecture,
    data: &Dataset,
    penalty: &PenaltyConfig,
    config: &TrainConfig,
    restart_seed: u64,
) -> Result<RestartRun> {
    let mut rng = seed::rng(restart_seed);
    let mut params = initialize(arch, config.init_scale, &mut rng);
    let mut obj = full_objective(&params, arch, data, penalty)?;
    let mut trace = vec![obj];
    let mut converged = false;
    let mut final_gamma = config.gamma_init;

    let mut small_step = false;

    for k in 1..=config.max_iters {
        let (_, grad) = smooth_loss_and_gradient(&params, arch, data, penalty.lambda0)
            .map_err(|e| SpinnError::Numeric(format!("iteration {k}: {e}")))?;
        if small_step {
            // confirm the fixed point: another step at the last accepted size barely moves the objective
            let trial = proximal_step(&params, &grad, final_gamma, penalty);
            if let Ok(trial_obj) = full_objective(&trial, arch, data, penalty) {
                if (trial_obj - obj).abs() < config.rel_tol * obj.abs() {
                    converged = true;
                    break;
                }
            }
        }
        let mut gamma = config.gamma_init;
        let mut accepted = None;
        for _ in 0..config.max_backtracks {
            let candidate = proximal_step(&params, &grad, gamma, penalty);
            if let Ok(cand_obj) = full_objective(&candidate, arch, data, penalty) {
                if line_search_accept(cand_obj, obj, &candidate, &params, gamma, config.line_search_t) {
                    accepted = Some((candidate, cand_obj));
                    break;
                }
            }
            gamma *= config.shrink;
        }
        let Some((candidate, cand_obj)) = accepted else {
            // no step size makes progress at this scale
            converged = true;
            break;
        };
        let rel_change = (obj - cand_obj).abs() / obj.abs().max(f64::MIN_POSITIVE);
        params = candidate;
        obj = cand_obj;
        trace.push(obj);
        final_gamma = gamma;
        small_step = rel_change < config.rel_tol;
    }
    Ok(RestartRun {
        params,
        trace,
        converged,
        final_gamma,
    })
}

/// Fits the penalized network from `config.n_restarts` random starts and keeps
/// the restart with the smallest final objective (lowest index on ties).
pub fn fit(
    arch: &NetworkArchitecture,
    data: &Dataset,
    penalty: &PenaltyConfig,
    config: &TrainConfig,
) -> Result<FitResult> {
    config.validate()?;
    penalty.validate()?;
    if arch.input_dim() != data.p() {
        return Err(SpinnError::shape(format!(
            "data has {} features, architecture expects {}",
            data.p(),
            arch.input_dim()
        )));
    }
    if arch.task() != data.task() {
        return Err(SpinnError::invalid(format!(
            "architecture task {:?} does not match dataset task {:?}",
            arch.task(),
            data.task()
        )));
    }

    let means = config.center_inputs.then(|| column_means(data));
    let centered;
    let work = match &means {
        Some(m) => {
            centered = Dataset::new(data.features() - m, data.responses().clone(), data.task())?;
            &centered
        }
        None => data,
    };
    let runs: Vec<Result<RestartRun>> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| run_restart(arch, work, penalty, config, seed::derive(config.seed, r as u64)))
        .collect();

    let restart_objectives: Vec<Option<f64>> = runs
        .iter()
        .map(|r| {
            r.as_ref()
                .ok()
                .map(|run| *run.trace.last().unwrap())
                .filter(|v| v.is_finite())
        })
        .collect();
    let best = restart_objectives
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((i, v)),
        });
    let Some((best_restart, _)) = best else {
        let first_err = runs
            .into_iter()
            .find_map(|r| r.err())
            .map(|e| e.to_string())
            .unwrap_or_else(|| "non-finite objective".into());
        return Err(SpinnError::Fit(format!(
            "all {} restarts failed; first error: {first_err}",
            config.n_restarts
        )));
    };
    let mut run = runs
        .into_iter()
        .nth(best_restart)
        .unwrap()
        .expect("best restart succeeded");
    if let Some(m) = &means {
        let shift = run.params.first_layer().dot(m);
        run.params.intercepts_mut()[0] -= &shift;
    }

    Ok(FitResult {
        arch: arch.clone(),
        penalty: *penalty,
        selected_features: run.params.selected_features(),
        n_active_hidden: run.params.active_hidden_count(),
        n_iters: run.trace.len() - 1,
        converged: run.converged,
        objective_trace: run.trace,
        params: run.params,
        restart_objectives,
        best_restart,
        final_gamma: run.final_gamma,
    })
}

fn column_means(data: &Dataset) -> Array1<f64> {
    data.features().mean_axis(Axis(0)).expect("datasets have at least one row")
}

/// Objective of the all-zero network; a fitted model should never do worse.
pub fn zero_network_objective(arch: &NetworkArchitecture, data: &Dataset, penalty: &PenaltyConfig) -> Result<f64> {
    full_objective(&NetworkParameters::zeros(arch), arch, data, penalty)
}

/// Zero matrix with the shape of the first layer of `arch`.
pub fn zero_first_layer(arch: &NetworkArchitecture) -> Array2<f64> {
    Array2::zeros((arch.first_hidden_width(), arch.input_dim()))
}
