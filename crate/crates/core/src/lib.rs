//! Sparse-input neural networks.
//!
//! A feedforward network whose first-layer weight columns (one column per
//! input feature) carry a sparse group lasso penalty, so that whole input
//! features are switched off with bit-exact zeros. Upper layers carry a ridge
//! penalty. Fitting uses proximal gradient descent with a monotone
//! backtracking line search.
//!
//! Modules:
//! * [`network`]: architecture, parameters, forward pass, smooth loss and its
//!   backpropagated gradient.
//! * [`penalty`]: the sparse group lasso, its proximal map and the full
//!   penalized objective.
//! * [`optimizer`]: the proximal gradient fit with restarts.
//! * [`model_selection`]: k-fold cross-validation over penalty and
//!   architecture grids, feature reports.
//! * [`simulation`]: synthetic scenarios and the rate / penalty-balance
//!   experiment drivers.

pub mod error;
pub mod model_selection;
pub mod network;
pub mod optimizer;
pub mod penalty;
pub mod seed;
pub mod simulation;
pub mod stats;

pub use error::{Result, SpinnError};

pub use model_selection::{
    cross_validate, feature_report, kfold_split, lambda_grid, CellResult, CvReport, FeatureReport, Fold,
    HyperGrid,
};
pub use network::{
    fast_tanh, forward, predict, smooth_loss, smooth_loss_gradient, Activation, Dataset, Gradient,
    NetworkArchitecture, NetworkParameters, Task,
};
pub use optimizer::{fit, gist_step, line_search_accept, FitResult, TrainConfig};
pub use penalty::{
    full_objective, group_soft_scale, omega_alpha, sgl_penalty, sgl_prox, soft_threshold,
    PenaltyConfig,
};
pub use simulation::{
    alpha_sweep, excess_loss, generate, irrelevant_penalty_mass, rate_experiment, LambdaRule,
    RateAxis, RateExperiment, RateExperimentResult, ScenarioData, ScenarioKind, ScenarioSpec,
    SweepCell, Truth,
};
