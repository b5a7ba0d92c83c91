//! Feedforward network definition, forward pass, smooth loss and its gradient.
//!
//! Layer `a` (0-based here) maps `z_a` to `z_{a+1} = act(W_a z_a + t_a)`; the
//! last layer is linear with a single output, optionally followed by the
//! logistic function for classification. `weights[0]` is the first-layer
//! matrix whose column `j` collects every weight leaving input feature `j`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinnError};

/// Predictions for classification are kept inside `[EPS, 1 - EPS]`.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => fast_tanh(x),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation's output value.
    #[inline]
    fn derivative_at_output(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - z * z,
            Activation::Sigmoid => z * (1.0 - z),
        }
    }
}

/// `tanh` through a single `exp`; absolute error is a few ulps of 1.
#[inline]
pub fn fast_tanh(x: f64) -> f64 {
    let e = (2.0 * x.abs()).exp();
    (1.0 - 2.0 / (e + 1.0)).copysign(x)
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawArchitecture")]
pub struct NetworkArchitecture {
    layer_widths: Vec<usize>,
    task: Task,
    #[serde(default)]
    activation: Activation,
}

#[derive(Deserialize)]
struct RawArchitecture {
    layer_widths: Vec<usize>,
    task: Task,
    #[serde(default)]
    activation: Activation,
}

impl TryFrom<RawArchitecture> for NetworkArchitecture {
    type Error = SpinnError;

    fn try_from(raw: RawArchitecture) -> Result<Self> {
        NetworkArchitecture::new(raw.layer_widths, raw.task, raw.activation)
    }
}

impl NetworkArchitecture {
    /// `layer_widths` is `[p, m_1, ..., m_L, 1]`.
    pub fn new(layer_widths: Vec<usize>, task: Task, activation: Activation) -> Result<Self> {
        if layer_widths.len() < 3 {
            return Err(SpinnError::invalid(format!(
                "need input, at least one hidden layer and an output, got widths {layer_widths:?}"
            )));
        }
        if layer_widths.contains(&0) {
            return Err(SpinnError::invalid(format!(
                "layer widths must be positive, got {layer_widths:?}"
            )));
        }
        if *layer_widths.last().unwrap() != 1 {
            return Err(SpinnError::invalid(format!(
                "output width must be 1, got {layer_widths:?}"
            )));
        }
        Ok(Self {
            layer_widths,
            task,
            activation,
        })
    }

    /// Builds `[p, hidden..., 1]`.
    pub fn with_hidden(p: usize, hidden: &[usize], task: Task, activation: Activation) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(p);
        widths.extend_from_slice(hidden);
        widths.push(1);
        Self::new(widths, task, activation)
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.layer_widths
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.layer_widths[1..self.layer_widths.len() - 1]
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.layer_widths.len() - 2
    }

    pub fn first_hidden_width(&self) -> usize {
        self.layer_widths[1]
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Total parameter count `sum_a m_a (m_{a-1} + 1)`.
    pub fn n_parameters(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }

    /// Same layers with a different input dimension.
    pub fn with_input_dim(&self, p: usize) -> Result<Self> {
        let mut widths = self.layer_widths.clone();
        widths[0] = p;
        Self::new(widths, self.task, self.activation)
    }

    /// Ordering key used to prefer smaller networks: parameter count, then widths.
    pub fn size_key(&self) -> (usize, Vec<usize>) {
        (self.n_parameters(), self.layer_widths.clone())
    }
}

/// Weights and intercepts of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    weights: Vec<Array2<f64>>,
    intercepts: Vec<Array1<f64>>,
}

impl NetworkParameters {
    pub fn zeros(arch: &NetworkArchitecture) -> Self {
        let widths = arch.layer_widths();
        let weights = widths
            .windows(2)
            .map(|w| Array2::zeros((w[1], w[0])))
            .collect();
        let intercepts = widths[1..].iter().map(|&m| Array1::zeros(m)).collect();
        Self {
            weights,
            intercepts,
        }
    }

    pub fn from_parts(
        arch: &NetworkArchitecture,
        weights: Vec<Array2<f64>>,
        intercepts: Vec<Array1<f64>>,
    ) -> Result<Self> {
        let params = Self {
            weights,
            intercepts,
        };
        params.check(arch)?;
        Ok(params)
    }

    /// Verifies every matrix and vector against `arch`.
    pub fn check(&self, arch: &NetworkArchitecture) -> Result<()> {
        let widths = arch.layer_widths();
        let n_layers = widths.len() - 1;
        if self.weights.len() != n_layers || self.intercepts.len() != n_layers {
            return Err(SpinnError::shape(format!(
                "expected {n_layers} layers, got {} weight matrices and {} intercept vectors",
                self.weights.len(),
                self.intercepts.len()
            )));
        }
        for (a, w) in widths.windows(2).enumerate() {
            if self.weights[a].dim() != (w[1], w[0]) {
                return Err(SpinnError::shape(format!(
                    "layer {a} weights: expected {}x{}, got {:?}",
                    w[1],
                    w[0],
                    self.weights[a].dim()
                )));
            }
            if self.intercepts[a].len() != w[1] {
                return Err(SpinnError::shape(format!(
                    "layer {a} intercepts: expected {}, got {}",
                    w[1],
                    self.intercepts[a].len()
                )));
            }
        }
        Ok(())
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn intercepts(&self) -> &[Array1<f64>] {
        &self.intercepts
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn intercepts_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.intercepts
    }

    pub fn into_parts(self) -> (Vec<Array2<f64>>, Vec<Array1<f64>>) {
        (self.weights, self.intercepts)
    }

    /// The first-layer matrix (`m_1 x p`).
    pub fn first_layer(&self) -> &Array2<f64> {
        &self.weights[0]
    }

    pub fn first_layer_mut(&mut self) -> &mut Array2<f64> {
        &mut self.weights[0]
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.intercepts.iter().map(|t| t.len()).sum::<usize>()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .flat_map(|w| w.iter().copied())
            .chain(self.intercepts.iter().flat_map(|t| t.iter().copied()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    /// Squared Euclidean distance over all parameters.
    pub fn squared_distance(&self, other: &Self) -> f64 {
        self.values()
            .zip(other.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// `self - step * grad`.
    pub fn stepped(&self, grad: &Gradient, step: f64) -> Self {
        let weights = self
            .weights
            .iter()
            .zip(&grad.weights)
            .map(|(w, g)| w - &(g * step))
            .collect();
        let intercepts = self
            .intercepts
            .iter()
            .zip(&grad.intercepts)
            .map(|(t, g)| t - &(g * step))
            .collect();
        Self {
            weights,
            intercepts,
        }
    }

    /// Indices of input features whose first-layer column has a nonzero entry.
    pub fn selected_features(&self) -> Vec<usize> {
        self.weights[0]
            .axis_iter(Axis(1))
            .enumerate()
            .filter(|(_, col)| col.iter().any(|&v| v != 0.0))
            .map(|(j, _)| j)
            .collect()
    }

    /// Number of first-layer hidden nodes with at least one nonzero incoming weight.
    pub fn active_hidden_count(&self) -> usize {
        self.weights[0]
            .axis_iter(Axis(0))
            .filter(|row| row.iter().any(|&v| v != 0.0))
            .count()
    }
}

/// Gradient of the smooth loss; one slot per weight matrix and intercept vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Array2<f64>>,
    pub intercepts: Vec<Array1<f64>>,
}

impl Gradient {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .flat_map(|w| w.iter().copied())
            .chain(self.intercepts.iter().flat_map(|t| t.iter().copied()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Observations `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    responses: Array1<f64>,
    task: Task,
}

impl Dataset {
    pub fn new(features: Array2<f64>, responses: Array1<f64>, task: Task) -> Result<Self> {
        let (n, p) = features.dim();
        if n == 0 || p == 0 {
            return Err(SpinnError::InvalidData(format!(
                "dataset must have at least one row and one column, got {n}x{p}"
            )));
        }
        if responses.len() != n {
            return Err(SpinnError::shape(format!(
                "{n} feature rows but {} responses",
                responses.len()
            )));
        }
        if let Some(((i, j), v)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(SpinnError::InvalidData(format!(
                "non-finite feature {v} at row {i}, column {j}"
            )));
        }
        if let Some((i, v)) = responses.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SpinnError::InvalidData(format!(
                "non-finite response {v} at row {i}"
            )));
        }
        if task == Task::Classification {
            if let Some((i, v)) = responses
                .iter()
                .enumerate()
                .find(|(_, &v)| v != 0.0 && v != 1.0)
            {
                return Err(SpinnError::InvalidData(format!(
                    "classification response must be 0 or 1, got {v} at row {i}"
                )));
            }
        }
        Ok(Self {
            features,
            responses,
            task,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn responses(&self) -> &Array1<f64> {
        &self.responses
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            responses: self.responses.select(Axis(0), indices),
            task: self.task,
        }
    }
}

struct ForwardPass {
    /// `hidden[a]` holds the activations of hidden layer `a + 1`, one row per sample.
    hidden: Vec<Array2<f64>>,
    /// Linear output before any link function.
    output: Array1<f64>,
}

fn check_inputs(params: &NetworkParameters, arch: &NetworkArchitecture, p: usize) -> Result<()> {
    params.check(arch)?;
    if p != arch.input_dim() {
        return Err(SpinnError::shape(format!(
            "input has {p} features, architecture expects {}",
            arch.input_dim()
        )));
    }
    Ok(())
}

fn forward_pass(params: &NetworkParameters, arch: &NetworkArchitecture, x: ArrayView2<f64>) -> ForwardPass {
    let act = arch.activation();
    let n_hidden = arch.n_hidden_layers();
    let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(n_hidden);
    for a in 0..n_hidden {
        let mut z = {
            let input = if a == 0 { x } else { hidden[a - 1].view() };
            input.dot(&params.weights[a].t())
        };
        z += &params.intercepts[a];
        z.mapv_inplace(|v| act.apply(v));
        hidden.push(z);
    }
    let top = &params.weights[n_hidden];
    let mut output = hidden[n_hidden - 1].dot(&top.row(0));
    output += params.intercepts[n_hidden][0];
    ForwardPass { hidden, output }
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Per-sample loss and its derivative with respect to the linear output.
#[inline]
fn loss_and_slope(task: Task, y: f64, out: f64) -> (f64, f64) {
    match task {
        Task::Regression => {
            let r = y - out;
            (r * r, -2.0 * r)
        }
        Task::Classification => {
            let raw = sigmoid(out);
            let z = clamp_prob(raw);
            let loss = -y * z.ln() - (1.0 - y) * (1.0 - z).ln();
            // the clamped loss is flat outside the clamp interval
            let slope = if raw == z { raw - y } else { 0.0 };
            (loss, slope)
        }
    }
}

/// Prediction for a single input vector.
pub fn forward(params: &NetworkParameters, arch: &NetworkArchitecture, x: ArrayView1<f64>) -> Result<f64> {
    let row = x.insert_axis(Axis(0));
    Ok(predict(params, arch, row)?[0])
}

/// Predictions for every row of `x`. Classification returns probabilities.
pub fn predict(params: &NetworkParameters, arch: &NetworkArchitecture, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    check_inputs(params, arch, x.ncols())?;
    let mut out = forward_pass(params, arch, x).output;
    if arch.task() == Task::Classification {
        out.mapv_inplace(|o| clamp_prob(sigmoid(o)));
    }
    Ok(out)
}

/// Mean per-sample loss of `predictions` (probabilities for classification).
pub fn empirical_loss(task: Task, responses: ArrayView1<f64>, predictions: ArrayView1<f64>) -> f64 {
    let n = responses.len() as f64;
    let total: f64 = responses
        .iter()
        .zip(predictions.iter())
        .map(|(&y, &f)| match task {
            Task::Regression => (y - f) * (y - f),
            Task::Classification => {
                let z = clamp_prob(f);
                -y * z.ln() - (1.0 - y) * (1.0 - z).ln()
            }
        })
        .sum();
    total / n
}

fn mean_output_loss(task: Task, data: &Dataset, output: &Array1<f64>) -> f64 {
    let total: f64 = data
        .responses()
        .iter()
        .zip(output.iter())
        .map(|(&y, &o)| loss_and_slope(task, y, o).0)
        .sum();
    total / data.n() as f64
}

fn ridge_term(params: &NetworkParameters) -> f64 {
    params.weights[1..]
        .iter()
        .map(|w| w.iter().map(|v| v * v).sum::<f64>())
        .sum()
}

fn check_lambda0(lambda0: f64) -> Result<()> {
    if !(lambda0 >= 0.0 && lambda0.is_finite()) {
        return Err(SpinnError::invalid(format!("lambda0 must be finite and >= 0, got {lambda0}")));
    }
    Ok(())
}

fn check_task(arch: &NetworkArchitecture, data: &Dataset) -> Result<()> {
    if arch.task() != data.task() {
        return Err(SpinnError::invalid(format!(
            "architecture task {:?} does not match dataset task {:?}",
            arch.task(),
            data.task()
        )));
    }
    Ok(())
}

/// Mean loss plus `lambda0` times the squared norm of every weight matrix above
/// the first layer. Intercepts are not penalized.
pub fn smooth_loss(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    data: &Dataset,
    lambda0: f64,
) -> Result<f64> {
    check_lambda0(lambda0)?;
    check_task(arch, data)?;
    check_inputs(params, arch, data.p())?;
    let pass = forward_pass(params, arch, data.features().view());
    let task = arch.task();
    let value = mean_output_loss(task, data, &pass.output) + lambda0 * ridge_term(params);
    if !value.is_finite() {
        return Err(SpinnError::Numeric(format!("smooth loss is {value}")));
    }
    Ok(value)
}

/// Smooth loss and its exact gradient by backpropagation.
pub fn smooth_loss_and_gradient(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    data: &Dataset,
    lambda0: f64,
) -> Result<(f64, Gradient)> {
    check_lambda0(lambda0)?;
    check_task(arch, data)?;
    check_inputs(params, arch, data.p())?;
    let x = data.features().view();
    let pass = forward_pass(params, arch, x);
    let task = arch.task();
    let inv_n = 1.0 / data.n() as f64;

    let mut delta = Array2::zeros((data.n(), 1));
    Zip::from(delta.column_mut(0))
        .and(data.responses())
        .and(&pass.output)
        .for_each(|d, &y, &o| *d = loss_and_slope(task, y, o).1 * inv_n);
    let value = mean_output_loss(task, data, &pass.output) + lambda0 * ridge_term(params);
    if !value.is_finite() {
        return Err(SpinnError::Numeric(format!("smooth loss is {value}")));
    }

    let n_hidden = arch.n_hidden_layers();
    let mut grad_w: Vec<Array2<f64>> = Vec::with_capacity(n_hidden + 1);
    let mut grad_t: Vec<Array1<f64>> = Vec::with_capacity(n_hidden + 1);
    // output layer
    grad_w.push(delta.t().dot(&pass.hidden[n_hidden - 1]));
    grad_t.push(delta.sum_axis(Axis(0)));
    let act = arch.activation();
    for a in (0..n_hidden).rev() {
        let mut d = delta.dot(&params.weights[a + 1]);
        Zip::from(&mut d)
            .and(&pass.hidden[a])
            .for_each(|d, &z| *d *= act.derivative_at_output(z));
        let input = if a == 0 { x } else { pass.hidden[a - 1].view() };
        grad_w.push(d.t().dot(&input));
        grad_t.push(d.sum_axis(Axis(0)));
        delta = d;
    }
    grad_w.reverse();
    grad_t.reverse();
    if lambda0 > 0.0 {
        for (g, w) in grad_w.iter_mut().zip(&params.weights).skip(1) {
            g.scaled_add(2.0 * lambda0, w);
        }
    }
    let grad = Gradient {
        weights: grad_w,
        intercepts: grad_t,
    };
    if !grad.is_finite() {
        return Err(SpinnError::Numeric("gradient has non-finite entries".into()));
    }
    Ok((value, grad))
}

/// Exact gradient of [`smooth_loss`] with respect to every weight and intercept.
pub fn smooth_loss_gradient(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    data: &Dataset,
    lambda0: f64,
) -> Result<Gradient> {
    smooth_loss_and_gradient(params, arch, data, lambda0).map(|(_, g)| g)
}
