//! Test-only oracles: loop-based re-implementations that share no code with
//! the vectorized library paths.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use spinn::{Activation, Dataset, NetworkArchitecture, NetworkParameters, Task};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct Instance {
    pub arch: NetworkArchitecture,
    pub params: NetworkParameters,
    pub data: Dataset,
    pub lambda0: f64,
}

/// Random network with `p <= 10`, `n <= 20`, one or two hidden layers.
pub fn random_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let p = r.random_range(1..=10usize);
    let n = r.random_range(1..=20usize);
    let n_hidden = r.random_range(1..=2usize);
    let hidden: Vec<usize> = (0..n_hidden).map(|_| r.random_range(1..=5usize)).collect();
    let task = if r.random_bool(0.5) { Task::Regression } else { Task::Classification };
    let activation = if r.random_bool(0.7) { Activation::Tanh } else { Activation::Sigmoid };
    let arch = NetworkArchitecture::with_hidden(p, &hidden, task, activation).unwrap();
    let mut params = NetworkParameters::zeros(&arch);
    for w in params.weights_mut() {
        w.mapv_inplace(|_| r.random_range(-1.0..1.0));
    }
    for t in params.intercepts_mut() {
        t.mapv_inplace(|_| r.random_range(-0.5..0.5));
    }
    let x = Array2::from_shape_fn((n, p), |_| r.random_range(-1.0..1.0));
    let y: Array1<f64> = match task {
        Task::Regression => Array1::from_shape_fn(n, |_| r.random_range(-2.0..2.0)),
        Task::Classification => Array1::from_shape_fn(n, |_| if r.random_bool(0.5) { 1.0 } else { 0.0 }),
    };
    let data = Dataset::new(x, y, task).unwrap();
    let lambda0 = if r.random_bool(0.3) { 0.0 } else { r.random_range(0.0..0.1) };
    Instance { arch, params, data, lambda0 }
}

fn act(a: Activation, v: f64) -> f64 {
    match a {
        Activation::Tanh => v.tanh(),
        Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
    }
}

/// Linear output of the network, computed neuron by neuron.
pub fn naive_linear_output(params: &NetworkParameters, arch: &NetworkArchitecture, x: &[f64]) -> f64 {
    let mut z: Vec<f64> = x.to_vec();
    let n_layers = params.weights().len();
    for a in 0..n_layers {
        let w = &params.weights()[a];
        let t = &params.intercepts()[a];
        let mut next = Vec::with_capacity(w.nrows());
        for i in 0..w.nrows() {
            let mut s = t[i];
            for j in 0..w.ncols() {
                s += w[[i, j]] * z[j];
            }
            next.push(if a + 1 < n_layers { act(arch.activation(), s) } else { s });
        }
        z = next;
    }
    z[0]
}

pub fn naive_forward(params: &NetworkParameters, arch: &NetworkArchitecture, x: &[f64]) -> f64 {
    let o = naive_linear_output(params, arch, x);
    match arch.task() {
        Task::Regression => o,
        Task::Classification => 1.0 / (1.0 + (-o).exp()),
    }
}

/// Mean loss plus ridge on upper layers, term by term.
pub fn naive_smooth_loss(params: &NetworkParameters, arch: &NetworkArchitecture, data: &Dataset, lambda0: f64) -> f64 {
    let n = data.n();
    let mut total = 0.0;
    for i in 0..n {
        let x: Vec<f64> = data.features().row(i).to_vec();
        let y = data.responses()[i];
        let f = naive_forward(params, arch, &x);
        total += match arch.task() {
            Task::Regression => (y - f).powi(2),
            Task::Classification => {
                let z = f.clamp(1e-12, 1.0 - 1e-12);
                -y * z.ln() - (1.0 - y) * (1.0 - z).ln()
            }
        };
    }
    let mut ridge = 0.0;
    for w in &params.weights()[1..] {
        for v in w.iter() {
            ridge += v * v;
        }
    }
    total / n as f64 + lambda0 * ridge
}

/// Sparse group lasso term computed from explicit column loops.
pub fn naive_sgl(theta1: &Array2<f64>, lambda: f64, alpha: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..theta1.ncols() {
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for i in 0..theta1.nrows() {
            l1 += theta1[[i, j]].abs();
            l2 += theta1[[i, j]] * theta1[[i, j]];
        }
        total += (1.0 - alpha) * l1 + alpha * l2.sqrt();
    }
    lambda * total
}
