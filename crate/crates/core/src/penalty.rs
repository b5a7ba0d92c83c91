//! Sparse group lasso on first-layer columns and its proximal map.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinnError};
use crate::network::{smooth_loss, Dataset, NetworkArchitecture, NetworkParameters};

/// Ridge weight `lambda0` on upper-layer weights, sparse group lasso weight
/// `lambda`, and the lasso / group lasso balance `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPenalty")]
pub struct PenaltyConfig {
    pub lambda0: f64,
    pub lambda: f64,
    pub alpha: f64,
}

#[derive(Deserialize)]
struct RawPenalty {
    lambda0: f64,
    lambda: f64,
    alpha: f64,
}

impl TryFrom<RawPenalty> for PenaltyConfig {
    type Error = SpinnError;

    fn try_from(raw: RawPenalty) -> Result<Self> {
        PenaltyConfig::new(raw.lambda0, raw.lambda, raw.alpha)
    }
}

impl PenaltyConfig {
    pub fn new(lambda0: f64, lambda: f64, alpha: f64) -> Result<Self> {
        let cfg = Self {
            lambda0,
            lambda,
            alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(SpinnError::invalid(format!("lambda0 must be finite and >= 0, got {}", self.lambda0)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(SpinnError::invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SpinnError::invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// `(1 - alpha) * ||theta||_1 + alpha * ||theta||_2`.
pub fn omega_alpha(theta: ArrayView1<f64>, alpha: f64) -> f64 {
    let l1: f64 = theta.iter().map(|v| v.abs()).sum();
    let l2 = theta.dot(&theta).sqrt();
    (1.0 - alpha) * l1 + alpha * l2
}

/// `lambda * sum_j omega_alpha(theta1[:, j])`.
pub fn sgl_penalty(theta1: ArrayView2<f64>, lambda: f64, alpha: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    lambda
        * theta1
            .axis_iter(Axis(1))
            .map(|col| omega_alpha(col, alpha))
            .sum::<f64>()
}

#[inline]
fn shrink_scalar(z: f64, c: f64) -> f64 {
    // emits +0.0 rather than -0.0 for shrunk negatives
    if z.abs() <= c {
        0.0
    } else {
        z - c.copysign(z)
    }
}

/// Coordinate-wise `sign(z_j) (|z_j| - c)_+`.
pub fn soft_threshold(z: ArrayView1<f64>, c: f64) -> Array1<f64> {
    z.mapv(|v| shrink_scalar(v, c))
}

/// `(1 - c / ||v||_2)_+ v`, with the zero vector mapped to itself.
pub fn group_soft_scale(v: ArrayView1<f64>, c: f64) -> Array1<f64> {
    let mut out = v.to_owned();
    group_soft_scale_inplace(out.view_mut(), c);
    out
}

fn group_soft_scale_inplace(mut v: ArrayViewMut1<f64>, c: f64) {
    let norm = v.dot(&v).sqrt();
    if norm <= c || norm == 0.0 {
        v.fill(0.0);
    } else {
        let factor = 1.0 - c / norm;
        v.mapv_inplace(|x| x * factor);
    }
}

/// Proximal map of `lambda * sum_j omega_alpha(column j)` at step size `step`:
/// soft-threshold every entry by `step * lambda * (1 - alpha)`, then scale each
/// column by `(1 - step * lambda * alpha / ||column||)_+`.
///
/// Zeroed entries and columns are exactly `+0.0`.
pub fn sgl_prox(theta1: ArrayView2<f64>, step: f64, lambda: f64, alpha: f64) -> Array2<f64> {
    let mut out = theta1.to_owned();
    sgl_prox_inplace(&mut out, step, lambda, alpha);
    out
}

pub(crate) fn sgl_prox_inplace(theta1: &mut Array2<f64>, step: f64, lambda: f64, alpha: f64) {
    if lambda == 0.0 {
        return;
    }
    let c_lasso = step * lambda * (1.0 - alpha);
    let c_group = step * lambda * alpha;
    if c_lasso > 0.0 {
        theta1.mapv_inplace(|v| shrink_scalar(v, c_lasso));
    }
    if c_group > 0.0 {
        for col in theta1.axis_iter_mut(Axis(1)) {
            group_soft_scale_inplace(col, c_group);
        }
    }
}

/// Smooth loss plus the sparse group lasso on the first layer.
pub fn full_objective(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    data: &Dataset,
    penalty: &PenaltyConfig,
) -> Result<f64> {
    penalty.validate()?;
    let smooth = smooth_loss(params, arch, data, penalty.lambda0)?;
    Ok(smooth + sgl_penalty(params.first_layer().view(), penalty.lambda, penalty.alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn omega_examples() {
        let t = array![3.0, -4.0];
        assert_eq!(omega_alpha(t.view(), 0.0), 7.0);
        assert_eq!(omega_alpha(t.view(), 1.0), 5.0);
        assert_eq!(omega_alpha(t.view(), 0.5), 6.0);
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(array![3.0, -1.0, 0.5].view(), 1.0), array![2.0, 0.0, 0.0]);
        let z = array![1.5, -2.25, 0.0, 1e-300];
        assert_eq!(soft_threshold(z.view(), 0.0), z);
        let out = soft_threshold(array![-2.0].view(), 5.0);
        assert_eq!(out[0].to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn group_soft_scale_examples() {
        let out = group_soft_scale(array![3.0, 4.0].view(), 1.0);
        assert!((out[0] - 2.4).abs() < 1e-15 && (out[1] - 3.2).abs() < 1e-15);
        assert_eq!(group_soft_scale(array![3.0, 4.0].view(), 5.0), array![0.0, 0.0]);
        assert_eq!(group_soft_scale(array![0.0, 0.0].view(), 0.0), array![0.0, 0.0]);
        assert_eq!(group_soft_scale(array![0.0, 0.0].view(), 2.0), array![0.0, 0.0]);
    }

    #[test]
    fn two_stage_prox_example() {
        let theta = array![[2.0], [-0.5]];
        let out = sgl_prox(theta.view(), 1.0, 1.0, 0.5);
        assert!((out[[0, 0]] - 1.0).abs() < 1e-15);
        assert_eq!(out[[1, 0]], 0.0);
    }

    #[test]
    fn zero_lambda_is_identity() {
        let theta = array![[2.0, -0.1], [-0.5, 3.0]];
        assert_eq!(sgl_prox(theta.view(), 0.7, 0.0, 0.3), theta);
    }

    #[test]
    fn zeroed_columns_are_positive_zero() {
        let theta = array![[-0.2, 5.0], [0.1, -0.3], [-1e-9, 0.0]];
        for alpha in [0.0, 0.4, 1.0] {
            let out = sgl_prox(theta.view(), 1.0, 1.0, alpha);
            for v in out.column(0) {
                assert_eq!(v.to_bits(), 0.0f64.to_bits(), "alpha {alpha}");
            }
            assert!(out.column(1).iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn alpha_extremes_match_direct_formulas() {
        let theta = array![[1.3, -0.2], [-0.7, 0.05], [0.4, -0.1]];
        // pure lasso: entrywise soft-threshold
        let lasso = sgl_prox(theta.view(), 0.5, 0.8, 0.0);
        assert_eq!(lasso, theta.mapv(|v| if v.abs() <= 0.4 { 0.0 } else { v - 0.4 * v.signum() }));
        // pure group lasso: column scaling only
        let group = sgl_prox(theta.view(), 0.5, 0.8, 1.0);
        for (j, col) in theta.axis_iter(Axis(1)).enumerate() {
            let norm = col.dot(&col).sqrt();
            let factor = (1.0 - 0.4 / norm).max(0.0);
            for i in 0..3 {
                assert!((group[[i, j]] - factor * col[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn penalty_config_validation() {
        assert!(PenaltyConfig::new(0.0, 0.0, 0.0).is_ok());
        assert!(PenaltyConfig::new(-1.0, 0.0, 0.5).is_err());
        assert!(PenaltyConfig::new(0.0, -0.1, 0.5).is_err());
        assert!(PenaltyConfig::new(0.0, 0.1, 1.5).is_err());
        assert!(PenaltyConfig::new(0.0, f64::NAN, 0.5).is_err());
    }
}
