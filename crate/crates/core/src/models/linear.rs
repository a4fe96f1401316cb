//! Penalised linear regression by cyclic coordinate descent.
//!
//! Minimises `½‖y − Xβ − b‖² + l1‖β‖₁ + ½·l2‖β‖²` over standardised features
//! (zero mean, unit population variance); the intercept is unpenalised.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdConfig {
    /// Stop when the largest coefficient change in a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for CdConfig {
    fn default() -> Self {
        CdConfig {
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    /// Zero marks a constant feature, whose coefficient is pinned at zero.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Intercept on the standardised scale (the mean of `y`).
    pub intercept: f64,
    /// Coefficients on the standardised scale.
    pub coefficients: Vec<f64>,
    pub standardization: Vec<Standardization>,
    pub l1_penalty: f64,
    pub l2_penalty: f64,
    pub sweeps: usize,
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

pub fn fit_linear(x: &Matrix, y: &[f64], l1_penalty: f64, l2_penalty: f64) -> Result<LinearModel> {
    fit_linear_with(x, y, l1_penalty, l2_penalty, CdConfig::default(), None)
}

/// As [`fit_linear`], optionally warm-started from standardised coefficients.
pub fn fit_linear_with(
    x: &Matrix,
    y: &[f64],
    l1_penalty: f64,
    l2_penalty: f64,
    cd: CdConfig,
    warm_start: Option<&[f64]>,
) -> Result<LinearModel> {
    let n = x.n_rows();
    let p = x.n_cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n < 2 {
        return Err(Error::InvalidParam("linear fit needs at least 2 rows".into()));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear fit inputs".into()));
    }
    if !(l1_penalty >= 0.0 && l2_penalty >= 0.0) {
        return Err(Error::InvalidParam("penalties must be non-negative".into()));
    }
    let nf = n as f64;
    let mut cols = x.columns();
    let mut standardization = Vec::with_capacity(p);
    for c in &mut cols {
        let mean = c.iter().sum::<f64>() / nf;
        let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        let sd = var.sqrt();
        let sd = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 0.0 };
        for v in c.iter_mut() {
            *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
        }
        standardization.push(Standardization { mean, sd });
    }
    let ymean = y.iter().sum::<f64>() / nf;
    let mut beta = match warm_start {
        Some(w) if w.len() == p => w.to_vec(),
        _ => vec![0.0; p],
    };
    let mut resid: Vec<f64> = y.iter().map(|v| v - ymean).collect();
    for (j, c) in cols.iter().enumerate() {
        if standardization[j].sd == 0.0 {
            beta[j] = 0.0;
        }
        if beta[j] != 0.0 {
            for (r, v) in resid.iter_mut().zip(c) {
                *r -= beta[j] * v;
            }
        }
    }
    // squared norm of each standardised column (n, or 0 for constants)
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let mut sweeps = 0;
    while sweeps < cd.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if norms[j] == 0.0 {
                continue;
            }
            let c = &cols[j];
            let old = beta[j];
            let rho = c.iter().zip(&resid).map(|(a, b)| a * b).sum::<f64>() + norms[j] * old;
            let new = soft_threshold(rho, l1_penalty) / (norms[j] + l2_penalty);
            let delta = new - old;
            if delta != 0.0 {
                for (r, v) in resid.iter_mut().zip(c) {
                    *r -= delta * v;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < cd.tol {
            break;
        }
    }
    Ok(LinearModel {
        intercept: ymean,
        coefficients: beta,
        standardization,
        l1_penalty,
        l2_penalty,
        sweeps,
    })
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut out = self.intercept;
        for (j, (b, s)) in self.coefficients.iter().zip(&self.standardization).enumerate() {
            if s.sd > 0.0 && *b != 0.0 {
                out += b * (row[j] - s.mean) / s.sd;
            }
        }
        out
    }

    /// Coefficients on the original feature scale.
    pub fn original_coefficients(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .zip(&self.standardization)
            .map(|(b, s)| if s.sd > 0.0 { b / s.sd } else { 0.0 })
            .collect()
    }

    pub fn original_intercept(&self) -> f64 {
        self.intercept
            - self
                .coefficients
                .iter()
                .zip(&self.standardization)
                .map(|(b, s)| if s.sd > 0.0 { b * s.mean / s.sd } else { 0.0 })
                .sum::<f64>()
    }

    /// |standardised coefficient| per feature.
    pub fn importance(&self) -> Vec<f64> {
        self.coefficients.iter().map(|b| b.abs()).collect()
    }

    /// Largest violation of the subgradient optimality conditions on the
    /// standardised problem, given the training data.
    pub fn kkt_violation(&self, x: &Matrix, y: &[f64]) -> f64 {
        let n = x.n_rows();
        let resid: Vec<f64> = (0..n).map(|i| y[i] - self.predict_row(x.row(i))).collect();
        let mut worst: f64 = 0.0;
        for (j, s) in self.standardization.iter().enumerate() {
            if s.sd == 0.0 {
                continue;
            }
            let g: f64 = (0..n).map(|i| (x.get(i, j) - s.mean) / s.sd * resid[i]).sum();
            let b = self.coefficients[j];
            let v = if b == 0.0 {
                (g.abs() - self.l1_penalty).max(0.0)
            } else {
                (g - self.l2_penalty * b - self.l1_penalty * b.signum()).abs()
            };
            worst = worst.max(v);
        }
        worst
    }
}
