mod common;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use spinn::model_selection::{cross_validate, feature_report, validation_loss, HyperGrid};
use spinn::simulation::{generate, ScenarioKind, ScenarioSpec};
use spinn::{fit, Activation, Dataset, NetworkArchitecture, PenaltyConfig, Task, TrainConfig};

fn arch(p: usize, hidden: &[usize]) -> NetworkArchitecture {
    NetworkArchitecture::with_hidden(p, hidden, Task::Regression, Activation::Tanh).unwrap()
}

#[test]
fn null_signal_prefers_heavy_penalty() {
    let (n, p) = (60, 5);
    let grid = HyperGrid {
        lambdas: vec![1e-4, 1.0],
        alphas: vec![0.5],
        lambda0: 0.001,
        architectures: vec![arch(p, &[3])],
    };
    let config = TrainConfig {
        max_iters: 1000,
        n_restarts: 1,
        ..Default::default()
    };
    let mut heavy_wins = 0;
    for seed in 0..20 {
        let mut r = common::rng(500 + seed);
        let x = Array2::from_shape_fn((n, p), |_| r.random_range(0.0..1.0));
        let y = Array1::from_shape_fn(n, |_| r.sample::<f64, _>(StandardNormal));
        let data = Dataset::new(x, y, Task::Regression).unwrap();
        let report = cross_validate(&data, &grid, 3, &config.with_seed(seed)).unwrap();
        let small = report.cells[0].mean_loss.unwrap();
        let large = report.cells[1].mean_loss.unwrap();
        if large <= small {
            heavy_wins += 1;
        }
    }
    assert!(heavy_wins > 10, "heavy penalty won {heavy_wins} of 20");
}

#[test]
fn cv_losses_are_recomputable_per_fold() {
    let data = generate(&ScenarioSpec::new(ScenarioKind::AdditiveUnivariate, 8, 60, 3)).unwrap();
    let grid = HyperGrid {
        lambdas: vec![0.005, 0.05],
        alphas: vec![0.0, 1.0],
        lambda0: 0.001,
        architectures: vec![arch(8, &[3]), arch(8, &[2, 2])],
    };
    let config = TrainConfig {
        max_iters: 300,
        n_restarts: 1,
        seed: 4,
        ..Default::default()
    };
    let report = cross_validate(&data.train, &grid, 3, &config).unwrap();
    assert_eq!(report.cells.len(), 8);
    let best = report.best_cell().mean_loss.unwrap();
    assert!(report.cells.iter().all(|c| c.mean_loss.unwrap() >= best));
    assert_eq!(report.refit.penalty, report.best_cell().penalty(0.001));
    assert_eq!(&report.refit.arch, &report.best_cell().architecture);

    // refit one cell by hand from the stored folds
    let cell = &report.cells[5];
    for (f, fold) in report.folds.iter().enumerate() {
        let fold_config = config.with_seed(spinn::seed::derive(config.seed, f as u64));
        let fitted = fit(&cell.architecture, &data.train.subset(&fold.train), &cell.penalty(0.001), &fold_config).unwrap();
        let loss = validation_loss(&fitted.params, &cell.architecture, &data.train, &fold.validation).unwrap();
        assert_eq!(loss, cell.fold_losses[f]);
    }
    let mean = cell.fold_losses.iter().sum::<f64>() / 3.0;
    assert!((cell.mean_loss.unwrap() - mean).abs() < 1e-15);
}

#[test]
fn grid_order_does_not_matter() {
    let data = generate(&ScenarioSpec::new(ScenarioKind::TeacherNet, 7, 45, 8)).unwrap();
    let config = TrainConfig {
        max_iters: 200,
        n_restarts: 1,
        seed: 2,
        ..Default::default()
    };
    let forward = HyperGrid {
        lambdas: vec![0.001, 0.01, 0.1],
        alphas: vec![0.25, 0.75],
        lambda0: 0.001,
        architectures: vec![arch(7, &[2]), arch(7, &[4])],
    };
    let mut reversed = forward.clone();
    reversed.lambdas.reverse();
    reversed.alphas.reverse();
    reversed.architectures.reverse();
    let a = cross_validate(&data.train, &forward, 3, &config).unwrap();
    let b = cross_validate(&data.train, &reversed, 3, &config).unwrap();
    let (ca, cb) = (a.best_cell(), b.best_cell());
    assert_eq!((ca.lambda, ca.alpha, &ca.architecture), (cb.lambda, cb.alpha, &cb.architecture));
    assert_eq!(ca.fold_losses, cb.fold_losses);
    assert_eq!(a.refit, b.refit);
    for cell in &a.cells {
        let twin = b
            .cells
            .iter()
            .find(|c| c.lambda == cell.lambda && c.alpha == cell.alpha && c.architecture == cell.architecture)
            .unwrap();
        assert_eq!(twin.fold_losses, cell.fold_losses);
    }
}

#[test]
fn tuned_teacher_fit_keeps_most_relevant_features() {
    let grid = HyperGrid {
        lambdas: vec![0.003, 0.01, 0.03],
        alphas: vec![0.5],
        lambda0: 0.001,
        architectures: vec![arch(10, &[4])],
    };
    let config = TrainConfig {
        gamma_init: 0.25,
        max_iters: 2000,
        n_restarts: 1,
        ..Default::default()
    };
    let mut hits = 0;
    for seed in 0..10 {
        let data = generate(&ScenarioSpec::new(ScenarioKind::TeacherNet, 10, 300, 900 + seed)).unwrap();
        let report = cross_validate(&data.train, &grid, 3, &config.with_seed(seed)).unwrap();
        let features = feature_report(&report.refit.params);
        let relevant = features.included.iter().filter(|&&j| j < 6).count();
        if relevant >= 4 {
            hits += 1;
        }
    }
    assert!(hits > 5, "majority of relevant features kept in {hits} of 10 seeds");
}

#[test]
fn penalty_cells_expose_their_config() {
    let grid = HyperGrid::with_defaults(vec![0.5, 0.1], 4, Task::Regression).unwrap();
    let cells = grid.cells();
    assert_eq!(cells.len(), 2 * 5 * 3);
    assert_eq!(cells[0].0, 0.5);
    assert!(PenaltyConfig::new(grid.lambda0, cells[7].0, cells[7].1).is_ok());
}
