//! Synthetic regression scenarios and experiment drivers.
//!
//! Covariates are i.i.d. `Uniform(0, 1)`; responses are `f*(x) + sigma * eps`
//! with standard normal `eps`. The true functions depend on the first six
//! features only. `sigma` is `sd(f*(X)) / snr`, with `sd(f*(X))` estimated once
//! per scenario from a fixed calibration sample of [`CALIBRATION_DRAWS`] points.

use std::fmt;
use std::str::FromStr;

use ndarray::{array, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinnError};
use crate::network::{fast_tanh, predict, Activation, Dataset, NetworkArchitecture, NetworkParameters, Task};
use crate::optimizer::{fit, FitResult, TrainConfig};
use crate::penalty::{omega_alpha, PenaltyConfig};
use crate::seed;
use crate::stats::{self, LinearFit};

pub const CALIBRATION_DRAWS: usize = 100_000;
const CALIBRATION_SEED: u64 = 0x5EED_CA1B_0000_0000;
const N_RELEVANT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[serde(alias = "teacher")]
    TeacherNet,
    #[serde(alias = "additive")]
    AdditiveUnivariate,
    #[serde(alias = "complex")]
    ComplexMultivariate,
    #[serde(alias = "highdim", alias = "high_dim")]
    HighDimAdditiveMultivariate,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::TeacherNet,
        ScenarioKind::AdditiveUnivariate,
        ScenarioKind::ComplexMultivariate,
        ScenarioKind::HighDimAdditiveMultivariate,
    ];

    /// 0-based indices of the features the true function depends on.
    pub fn relevant(self) -> Vec<usize> {
        (0..N_RELEVANT).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::TeacherNet => "teacher",
            ScenarioKind::AdditiveUnivariate => "additive",
            ScenarioKind::ComplexMultivariate => "complex",
            ScenarioKind::HighDimAdditiveMultivariate => "highdim",
        }
    }

    pub fn truth(self) -> Truth {
        match self {
            ScenarioKind::TeacherNet => Truth::TeacherNet,
            ScenarioKind::AdditiveUnivariate => Truth::AdditiveUnivariate,
            ScenarioKind::ComplexMultivariate => Truth::ComplexMultivariate,
            ScenarioKind::HighDimAdditiveMultivariate => Truth::HighDimAdditiveMultivariate,
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = SpinnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "teacher" | "teacher_net" | "teachernet" => Ok(ScenarioKind::TeacherNet),
            "additive" | "additive_univariate" => Ok(ScenarioKind::AdditiveUnivariate),
            "complex" | "complex_multivariate" => Ok(ScenarioKind::ComplexMultivariate),
            "highdim" | "high_dim" | "high_dim_additive_multivariate" => {
                Ok(ScenarioKind::HighDimAdditiveMultivariate)
            }
            other => Err(SpinnError::invalid(format!(
                "unknown scenario '{other}' (expected teacher, additive, complex or highdim)"
            ))),
        }
    }
}

/// Known regression function of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Truth {
    /// `tanh(x1 + 2x2 - 3x3 + 2x4) + 2 tanh(x1 - 2x5 + 2x6) + tanh(-x2 - x3 - x6) + tanh(x5 - 0.5x3 + 0.5x6)`
    TeacherNet,
    /// `sin(2x1) + cos(5x2) + x3^3 - sin(x4) + x5 - x6^2`
    AdditiveUnivariate,
    /// `sin(x1 (x1 + x2)) cos(x3 + x4 x5) sin(e^x5 + e^x6 - x2)`
    ComplexMultivariate,
    /// `min(x1, x2) cos(1.5x3 + 2x4) + e^(x5 + sin x4) x2 + sin(max(x6, x3)) (x5 - x1)`
    HighDimAdditiveMultivariate,
}

impl Truth {
    pub fn eval(&self, x: ArrayView1<f64>) -> f64 {
        let (x1, x2, x3, x4, x5, x6) = (x[0], x[1], x[2], x[3], x[4], x[5]);
        match self {
            Truth::TeacherNet => {
                fast_tanh(x1 + 2.0 * x2 - 3.0 * x3 + 2.0 * x4)
                    + 2.0 * fast_tanh(x1 - 2.0 * x5 + 2.0 * x6)
                    + fast_tanh(-x2 - x3 - x6)
                    + fast_tanh(x5 - 0.5 * x3 + 0.5 * x6)
            }
            Truth::AdditiveUnivariate => {
                (2.0 * x1).sin() + (5.0 * x2).cos() + x3.powi(3) - x4.sin() + x5 - x6 * x6
            }
            Truth::ComplexMultivariate => {
                (x1 * (x1 + x2)).sin() * (x3 + x4 * x5).cos() * (x5.exp() + x6.exp() - x2).sin()
            }
            Truth::HighDimAdditiveMultivariate => {
                x1.min(x2) * (1.5 * x3 + 2.0 * x4).cos()
                    + (x5 + x4.sin()).exp() * x2
                    + x6.max(x3).sin() * (x5 - x1)
            }
        }
    }

    pub fn eval_rows(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.axis_iter(Axis(0)).map(|row| self.eval(row)).collect()
    }
}

/// The teacher function written as a `[p, 4, 1]` tanh network.
pub fn teacher_network(p: usize) -> Result<(NetworkArchitecture, NetworkParameters)> {
    if p < N_RELEVANT {
        return Err(SpinnError::invalid(format!("teacher network needs p >= 6, got {p}")));
    }
    let arch = NetworkArchitecture::with_hidden(p, &[4], Task::Regression, Activation::Tanh)?;
    let mut theta1 = Array2::zeros((4, p));
    let rows = [
        [1.0, 2.0, -3.0, 2.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0, -2.0, 2.0],
        [0.0, -1.0, -1.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, -0.5, 0.0, 1.0, 0.5],
    ];
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            theta1[[i, j]] = v;
        }
    }
    let params = NetworkParameters::from_parts(
        &arch,
        vec![theta1, array![[1.0, 2.0, 1.0, 1.0]]],
        vec![Array1::zeros(4), array![0.0]],
    )?;
    Ok((arch, params))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub p: usize,
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_snr")]
    pub snr: f64,
    pub seed: u64,
}

fn default_n_test() -> usize {
    2000
}

fn default_snr() -> f64 {
    2.0
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, p: usize, n_train: usize, seed: u64) -> Self {
        Self {
            kind,
            p,
            n_train,
            n_test: default_n_test(),
            snr: default_snr(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < N_RELEVANT {
            return Err(SpinnError::invalid(format!(
                "scenario {} depends on 6 features, got p = {}",
                self.kind, self.p
            )));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(SpinnError::invalid("n_train and n_test must be positive"));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(SpinnError::invalid(format!("snr must be > 0, got {}", self.snr)));
        }
        Ok(())
    }
}

/// Which sample a random stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

fn stream(seed: u64, split: Split, noise: bool) -> u64 {
    let id = match (split, noise) {
        (Split::Train, false) => 1,
        (Split::Train, true) => 2,
        (Split::Test, false) => 3,
        (Split::Test, true) => 4,
    };
    seed::derive(seed, id)
}

/// Uniform(0, 1) covariates for one split.
pub fn covariate_draws(seed: u64, split: Split, n: usize, p: usize) -> Array2<f64> {
    let mut rng = seed::rng(stream(seed, split, false));
    Array2::from_shape_simple_fn((n, p), || rng.random::<f64>())
}

/// Standard normal noise for one split; independent of the covariate stream.
pub fn noise_draws(seed: u64, split: Split, n: usize) -> Array1<f64> {
    let mut rng = seed::rng(stream(seed, split, true));
    Array1::from_shape_simple_fn(n, || rng.sample(StandardNormal))
}

/// Monte Carlo standard deviation of `f*(X)` from the fixed calibration sample.
pub fn signal_sd(kind: ScenarioKind) -> f64 {
    let x = covariate_draws(
        seed::derive(CALIBRATION_SEED, kind.index()),
        Split::Train,
        CALIBRATION_DRAWS,
        N_RELEVANT,
    );
    let values = kind.truth().eval_rows(x.view());
    stats::sample_sd(values.as_slice().unwrap())
}

/// Noise standard deviation giving `sd(f*(X)) / sigma = snr`.
pub fn noise_sd(kind: ScenarioKind, snr: f64) -> f64 {
    signal_sd(kind) / snr
}

#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub spec: ScenarioSpec,
    pub train: Dataset,
    pub test: Dataset,
    pub truth: Truth,
    pub sigma: f64,
    pub relevant: Vec<usize>,
}

fn draw_split(spec: &ScenarioSpec, truth: Truth, sigma: f64, split: Split, n: usize) -> Result<Dataset> {
    let x = covariate_draws(spec.seed, split, n, spec.p);
    let eps = noise_draws(spec.seed, split, n);
    let y = truth.eval_rows(x.view()) + &(eps * sigma);
    Dataset::new(x, y, Task::Regression)
}

/// Draws independent train and test samples for `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<ScenarioData> {
    spec.validate()?;
    let truth = spec.kind.truth();
    let sigma = noise_sd(spec.kind, spec.snr);
    let train = draw_split(spec, truth, sigma, Split::Train, spec.n_train)?;
    let test = draw_split(spec, truth, sigma, Split::Test, spec.n_test)?;
    Ok(ScenarioData {
        spec: spec.clone(),
        train,
        test,
        truth,
        sigma,
        relevant: spec.kind.relevant(),
    })
}

/// Mean over the rows of `test_x` of `(truth(x) - network(x))^2`.
pub fn excess_loss_of(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    truth: impl Fn(ArrayView1<f64>) -> f64,
    test_x: ArrayView2<f64>,
) -> Result<f64> {
    if test_x.nrows() == 0 {
        return Err(SpinnError::invalid("excess loss needs at least one test point"));
    }
    let fitted = predict(params, arch, test_x)?;
    let total: f64 = fitted
        .iter()
        .zip(test_x.axis_iter(Axis(0)))
        .map(|(f, x)| {
            let d = truth(x) - f;
            d * d
        })
        .sum();
    Ok(total / test_x.nrows() as f64)
}

pub fn excess_loss(fit: &FitResult, truth: &Truth, test_x: ArrayView2<f64>) -> Result<f64> {
    excess_loss_of(&fit.params, &fit.arch, |x| truth.eval(x), test_x)
}

/// `sum_{j in columns} omega_alpha(theta1[:, j])`.
pub fn column_penalty_mass(theta1: ArrayView2<f64>, columns: impl IntoIterator<Item = usize>, alpha: f64) -> f64 {
    columns.into_iter().map(|j| omega_alpha(theta1.column(j), alpha)).sum()
}

/// Sparse group lasso mass on first-layer columns outside `relevant`.
pub fn irrelevant_penalty_mass(params: &NetworkParameters, relevant: &[usize], alpha: f64) -> f64 {
    let theta1 = params.first_layer();
    let irrelevant = (0..theta1.ncols()).filter(|j| !relevant.contains(j));
    column_penalty_mass(theta1.view(), irrelevant, alpha)
}

/// How the sparse group lasso weight is chosen for each simulated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum LambdaRule {
    Fixed { lambda: f64 },
    /// `lambda = scale * sqrt(ln(n) * ln(p) / n)`.
    Scaled { scale: f64 },
}

impl LambdaRule {
    pub fn lambda(&self, n: usize, p: usize) -> f64 {
        match *self {
            LambdaRule::Fixed { lambda } => lambda,
            LambdaRule::Scaled { scale } => {
                let (n, p) = (n as f64, p as f64);
                scale * (n.ln() * p.ln() / n).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateAxis {
    /// Training sample size.
    N,
    /// Number of covariates.
    P,
    /// Width of the single hidden layer.
    M1,
}

impl FromStr for RateAxis {
    type Err = SpinnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" => Ok(RateAxis::N),
            "p" => Ok(RateAxis::P),
            "m1" | "m" => Ok(RateAxis::M1),
            other => Err(SpinnError::invalid(format!("unknown axis '{other}' (expected n, p or m1)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperiment {
    pub axis: RateAxis,
    pub grid: Vec<usize>,
    pub base: ScenarioSpec,
    /// Hidden widths for the N and P axes; the M1 axis replaces the (single) width.
    pub hidden: Vec<usize>,
    pub lambda_rule: LambdaRule,
    pub lambda0: f64,
    pub alpha: f64,
    pub train: TrainConfig,
    pub replicates: usize,
}

/// Per-replicate outcome at one grid value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub excess_loss: f64,
    pub irrelevant_mass: f64,
    pub n_selected: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub value: usize,
    pub mean_excess: f64,
    pub se_excess: f64,
    pub mean_irrelevant: f64,
    pub se_irrelevant: f64,
    pub mean_selected: f64,
    pub lambda: f64,
    pub n_ok: usize,
    pub replicates: Vec<ReplicateOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    /// Response, e.g. `ln(excess)`.
    pub response: String,
    /// One name per regressor, in coefficient order after the intercept.
    pub regressors: Vec<String>,
    /// Grid values that entered the fit.
    pub points: Vec<usize>,
    pub fit: LinearFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperimentResult {
    pub axis: RateAxis,
    pub replicates: usize,
    pub points: Vec<RatePoint>,
    pub fits: Vec<NamedFit>,
    /// Largest over smallest mean excess loss across the grid.
    pub excess_max_min_ratio: f64,
    /// Spearman correlation between grid value and mean excess loss.
    pub excess_spearman: Option<f64>,
}

impl RateExperimentResult {
    pub fn fit_named(&self, response: &str) -> Option<&NamedFit> {
        self.fits.iter().find(|f| f.response == response)
    }
}

/// `ln(ln n / n)`.
pub fn log_rate(n: usize) -> f64 {
    let n = n as f64;
    (n.ln() / n).ln()
}

/// Regressions summarizing a set of rate points.
///
/// * N axis: `ln(mean excess)` and `ln(mean irrelevant mass)` on `ln(ln n / n)`;
///   the irrelevant-mass fit uses only `n >= 400`.
/// * P axis: mean excess on `p` and `ln p`; mean irrelevant mass on `p` and `sqrt(ln p)`.
/// * M1 axis: no regressions.
pub fn fit_rates(axis: RateAxis, points: &[RatePoint]) -> Vec<NamedFit> {
    let named = |response: &str, regressors: &[&str], pts: Vec<&RatePoint>, xs: Vec<Vec<f64>>, y: Vec<f64>| NamedFit {
        response: response.to_string(),
        regressors: regressors.iter().map(|s| s.to_string()).collect(),
        points: pts.iter().map(|p| p.value).collect(),
        fit: stats::ols(&xs, &y),
    };
    match axis {
        RateAxis::N => {
            let all: Vec<&RatePoint> = points.iter().collect();
            let x_all = vec![all.iter().map(|p| log_rate(p.value)).collect()];
            let y_excess = all.iter().map(|p| p.mean_excess.ln()).collect();
            let large: Vec<&RatePoint> = points.iter().filter(|p| p.value >= 400).collect();
            let x_large = vec![large.iter().map(|p| log_rate(p.value)).collect()];
            let y_irr = large.iter().map(|p| p.mean_irrelevant.ln()).collect();
            vec![
                named("ln_excess", &["ln_log_n_over_n"], all, x_all, y_excess),
                named("ln_irrelevant_mass", &["ln_log_n_over_n"], large, x_large, y_irr),
            ]
        }
        RateAxis::P => {
            let all: Vec<&RatePoint> = points.iter().collect();
            let p: Vec<f64> = all.iter().map(|q| q.value as f64).collect();
            let ln_p: Vec<f64> = p.iter().map(|v| v.ln()).collect();
            let sqrt_ln_p: Vec<f64> = ln_p.iter().map(|v| v.sqrt()).collect();
            vec![
                named(
                    "excess",
                    &["p", "ln_p"],
                    all.clone(),
                    vec![p.clone(), ln_p],
                    all.iter().map(|q| q.mean_excess).collect(),
                ),
                named(
                    "irrelevant_mass",
                    &["p", "sqrt_ln_p"],
                    all.clone(),
                    vec![p, sqrt_ln_p],
                    all.iter().map(|q| q.mean_irrelevant).collect(),
                ),
            ]
        }
        RateAxis::M1 => Vec::new(),
    }
}

/// `lambda` scale for the n axis at desk scale.
pub const DESK_LAMBDA_SCALE: f64 = 0.07;
/// `lambda` scale for the p and m1 axes (n = 200, p up to 400).
pub const DESK_WIDE_LAMBDA_SCALE: f64 = 0.25;

impl RateExperiment {
    /// Desk-scale defaults on the teacher scenario: n in 100..1600 with p = 10,
    /// p in 25..400 with n = 200, or m1 in {4, 8, 12, 16} with n = 200, p = 50.
    /// Five replicates, `lambda = scale sqrt(ln n ln p / n)` with scale 0.07 on
    /// the n axis and 0.25 on the other two, alpha 0.5.
    pub fn desk(axis: RateAxis, seed: u64) -> Self {
        let (grid, p, n, scale) = match axis {
            RateAxis::N => (vec![100, 200, 400, 800, 1600], 10, 0, DESK_LAMBDA_SCALE),
            RateAxis::P => (vec![25, 50, 100, 200, 400], 0, 200, DESK_WIDE_LAMBDA_SCALE),
            RateAxis::M1 => (vec![4, 8, 12, 16], 50, 200, DESK_WIDE_LAMBDA_SCALE),
        };
        Self {
            axis,
            grid,
            base: ScenarioSpec::new(ScenarioKind::TeacherNet, p, n, seed),
            hidden: vec![4],
            lambda_rule: LambdaRule::Scaled { scale },
            lambda0: 0.001,
            alpha: 0.5,
            train: TrainConfig {
                gamma_init: 0.25,
                max_iters: 20_000,
                rel_tol: 1e-7,
                ..Default::default()
            },
            replicates: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.len() < 3 {
            return Err(SpinnError::invalid(format!(
                "rate experiments need at least 3 grid points, got {}",
                self.grid.len()
            )));
        }
        if self.grid.contains(&0) {
            return Err(SpinnError::invalid("grid values must be positive"));
        }
        if self.replicates == 0 {
            return Err(SpinnError::invalid("replicates must be positive"));
        }
        if self.axis == RateAxis::M1 && self.hidden.len() > 1 {
            return Err(SpinnError::invalid("the m1 axis varies a single hidden layer"));
        }
        PenaltyConfig::new(self.lambda0, 0.0, self.alpha)?;
        self.train.validate()?;
        self.spec_for(*self.grid.iter().min().unwrap(), 0).validate()
    }

    fn spec_for(&self, value: usize, replicate: usize) -> ScenarioSpec {
        let mut spec = self.base.clone();
        spec.seed = seed::derive(self.base.seed, replicate as u64);
        match self.axis {
            RateAxis::N => spec.n_train = value,
            RateAxis::P => spec.p = value,
            RateAxis::M1 => {}
        }
        spec
    }

    fn hidden_for(&self, value: usize) -> Vec<usize> {
        match self.axis {
            RateAxis::M1 => vec![value],
            _ => self.hidden.clone(),
        }
    }

    fn run_one(&self, value: usize, replicate: usize) -> Result<ReplicateOutcome> {
        let spec = self.spec_for(value, replicate);
        let data = generate(&spec)?;
        let arch = NetworkArchitecture::with_hidden(spec.p, &self.hidden_for(value), Task::Regression, Activation::Tanh)?;
        let lambda = self.lambda_rule.lambda(spec.n_train, spec.p);
        let penalty = PenaltyConfig::new(self.lambda0, lambda, self.alpha)?;
        let config = self.train.with_seed(seed::derive(spec.seed, 0xF17));
        let fitted = fit(&arch, &data.train, &penalty, &config)?;
        Ok(ReplicateOutcome {
            excess_loss: excess_loss(&fitted, &data.truth, data.test.features().view())?,
            irrelevant_mass: irrelevant_penalty_mass(&fitted.params, &data.relevant, self.alpha),
            n_selected: fitted.selected_features.len(),
            lambda,
        })
    }
}

/// Runs every (grid value, replicate) fit and summarizes them per grid value.
pub fn rate_experiment(experiment: &RateExperiment) -> Result<RateExperimentResult> {
    experiment.validate()?;
    let jobs: Vec<(usize, usize)> = (0..experiment.grid.len())
        .flat_map(|g| (0..experiment.replicates).map(move |r| (g, r)))
        .collect();
    let outcomes: Vec<Result<ReplicateOutcome>> = jobs
        .par_iter()
        .map(|&(g, r)| experiment.run_one(experiment.grid[g], r))
        .collect();

    let mut points = Vec::with_capacity(experiment.grid.len());
    for (g, &value) in experiment.grid.iter().enumerate() {
        let reps: Vec<ReplicateOutcome> = outcomes[g * experiment.replicates..(g + 1) * experiment.replicates]
            .iter()
            .filter_map(|o| o.as_ref().ok().cloned())
            .collect();
        if reps.is_empty() {
            let err = outcomes[g * experiment.replicates].as_ref().err().unwrap();
            return Err(SpinnError::Fit(format!(
                "every replicate failed at grid value {value}: {err}"
            )));
        }
        points.push(summarize_point(value, reps));
    }
    Ok(summarize(experiment.axis, experiment.replicates, points))
}

fn summarize_point(value: usize, reps: Vec<ReplicateOutcome>) -> RatePoint {
    let excess: Vec<f64> = reps.iter().map(|r| r.excess_loss).collect();
    let irr: Vec<f64> = reps.iter().map(|r| r.irrelevant_mass).collect();
    let selected: Vec<f64> = reps.iter().map(|r| r.n_selected as f64).collect();
    RatePoint {
        value,
        mean_excess: stats::mean(&excess),
        se_excess: stats::standard_error(&excess),
        mean_irrelevant: stats::mean(&irr),
        se_irrelevant: stats::standard_error(&irr),
        mean_selected: stats::mean(&selected),
        lambda: reps[0].lambda,
        n_ok: reps.len(),
        replicates: reps,
    }
}

/// Builds the result (regressions, ratio, rank correlation) from finished points.
pub fn summarize(axis: RateAxis, replicates: usize, points: Vec<RatePoint>) -> RateExperimentResult {
    let fits = fit_rates(axis, &points);
    let excess: Vec<f64> = points.iter().map(|p| p.mean_excess).collect();
    let values: Vec<f64> = points.iter().map(|p| p.value as f64).collect();
    let max = excess.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = excess.iter().cloned().fold(f64::INFINITY, f64::min);
    RateExperimentResult {
        axis,
        replicates,
        fits,
        excess_max_min_ratio: max / min,
        excess_spearman: stats::spearman(&values, &excess),
        points,
    }
}

/// Synthetic rate points with `excess = (ln n / n)^exponent` and
/// `irrelevant = (ln n / n)^(exponent / 2)`; checks the regression machinery alone.
pub fn power_law_points(grid: &[usize], exponent: f64) -> Vec<RatePoint> {
    grid.iter()
        .map(|&n| {
            let rate = (n as f64).ln() / n as f64;
            let excess = rate.powf(exponent);
            let irr = rate.powf(exponent / 2.0);
            RatePoint {
                value: n,
                mean_excess: excess,
                se_excess: 0.0,
                mean_irrelevant: irr,
                se_irrelevant: 0.0,
                mean_selected: 0.0,
                lambda: 0.0,
                n_ok: 1,
                replicates: vec![ReplicateOutcome {
                    excess_loss: excess,
                    irrelevant_mass: irr,
                    n_selected: 0,
                    lambda: 0.0,
                }],
            }
        })
        .collect()
}

/// One cell of the lasso / group lasso weight sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    /// `lambda * (1 - alpha)`.
    pub lasso_weight: f64,
    /// `lambda * alpha`.
    pub group_weight: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// Mean squared distance to the truth on the test sample.
    pub mse: f64,
    pub relevant_share: f64,
    pub irrelevant_share: f64,
    /// Set when the whole first layer is zero; shares are then reported as 0.
    pub empty: bool,
    pub n_selected: usize,
}

/// Converts separate lasso and group lasso weights into `(lambda, alpha)`.
pub fn split_weights(lasso_weight: f64, group_weight: f64) -> (f64, f64) {
    let lambda = lasso_weight + group_weight;
    let alpha = if lambda > 0.0 { group_weight / lambda } else { 0.0 };
    (lambda, alpha)
}

/// Fits every `(lasso weight, group weight)` pair on one simulated dataset.
pub fn alpha_sweep(
    lasso_weights: &[f64],
    group_weights: &[f64],
    spec: &ScenarioSpec,
    hidden: &[usize],
    lambda0: f64,
    train: &TrainConfig,
) -> Result<Vec<SweepCell>> {
    if lasso_weights.is_empty() || group_weights.is_empty() {
        return Err(SpinnError::invalid("sweep grids must be non-empty"));
    }
    let data = generate(spec)?;
    let arch = NetworkArchitecture::with_hidden(spec.p, hidden, Task::Regression, Activation::Tanh)?;
    let pairs: Vec<(f64, f64)> = lasso_weights
        .iter()
        .flat_map(|&a| group_weights.iter().map(move |&b| (a, b)))
        .collect();
    pairs
        .par_iter()
        .map(|&(a, b)| {
            let (lambda, alpha) = split_weights(a, b);
            let penalty = PenaltyConfig::new(lambda0, lambda, alpha)?;
            let fitted = fit(&arch, &data.train, &penalty, train)?;
            let mse = excess_loss(&fitted, &data.truth, data.test.features().view())?;
            let theta1 = fitted.params.first_layer().view();
            let relevant = column_penalty_mass(theta1, data.relevant.iter().copied(), alpha);
            let total = column_penalty_mass(theta1, 0..spec.p, alpha);
            let empty = total == 0.0;
            let (relevant_share, irrelevant_share) = if empty {
                (0.0, 0.0)
            } else {
                (relevant / total, (total - relevant) / total)
            };
            Ok(SweepCell {
                lasso_weight: a,
                group_weight: b,
                lambda,
                alpha,
                mse,
                relevant_share,
                irrelevant_share,
                empty,
                n_selected: fitted.selected_features.len(),
            })
        })
        .collect()
}
