//! Small descriptive statistics and least squares helpers.

use serde::{Deserialize, Serialize};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Standard error of the mean.
pub fn standard_error(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    sample_sd(values) / (values.len() as f64).sqrt()
}

/// Ordinary least squares fit with an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Intercept first, then one coefficient per regressor. Empty when degenerate.
    pub coefficients: Vec<f64>,
    /// Set when the centered design is (numerically) rank deficient.
    pub degenerate: bool,
    pub n_points: usize,
}

impl LinearFit {
    pub fn intercept(&self) -> Option<f64> {
        self.coefficients.first().copied()
    }

    /// Coefficient of regressor `k` (0-based, intercept excluded).
    pub fn slope(&self, k: usize) -> Option<f64> {
        self.coefficients.get(k + 1).copied()
    }
}

/// Regresses `y` on the columns of `x` (each inner vec is one regressor) plus an intercept.
///
/// Regressors are centered first; a pivot smaller than `1e-10` times the
/// largest centered sum of squares flags the fit as degenerate.
pub fn ols(regressors: &[Vec<f64>], y: &[f64]) -> LinearFit {
    let n = y.len();
    let k = regressors.len();
    let degenerate = LinearFit {
        coefficients: Vec::new(),
        degenerate: true,
        n_points: n,
    };
    if n < k + 1 || regressors.iter().any(|r| r.len() != n) || y.iter().any(|v| !v.is_finite()) {
        return degenerate;
    }
    let y_mean = mean(y);
    let x_means: Vec<f64> = regressors.iter().map(|r| mean(r)).collect();
    let centered: Vec<Vec<f64>> = regressors
        .iter()
        .zip(&x_means)
        .map(|(r, m)| r.iter().map(|v| v - m).collect())
        .collect();

    // normal equations on centered data, augmented with the right-hand side
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = centered[i].iter().zip(&centered[j]).map(|(u, v)| u * v).sum();
        }
        a[i][k] = centered[i].iter().zip(y).map(|(u, v)| u * (v - y_mean)).sum();
    }
    let scale = (0..k).map(|i| a[i][i]).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return degenerate;
    }
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        if a[pivot][col].abs() <= 1e-10 * scale {
            return degenerate;
        }
        a.swap(col, pivot);
        for row in 0..k {
            if row != col {
                let f = a[row][col] / a[col][col];
                for c in col..=k {
                    a[row][c] -= f * a[col][c];
                }
            }
        }
    }
    let slopes: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
    let intercept = y_mean - slopes.iter().zip(&x_means).map(|(b, m)| b * m).sum::<f64>();
    let mut coefficients = vec![intercept];
    coefficients.extend(slopes);
    LinearFit {
        coefficients,
        degenerate: false,
        n_points: n,
    }
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (average ranks for ties). `None` if either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    let rx = ranks(x);
    let ry = ranks(y);
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}
