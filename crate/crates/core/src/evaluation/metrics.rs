use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Design;
use crate::models::{ModelSpec, Regressor};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `None` when the reference values are constant (or a single row).
    pub r2: Option<f64>,
    pub mse: f64,
    pub rmse: f64,
    pub n: usize,
    pub split_id: String,
}

pub(crate) fn metrics_any(y: &[f64], yhat: &[f64], split_id: &str) -> MetricsReport {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let ss_tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    let mse = ss_res / n as f64;
    MetricsReport {
        r2: (n >= 2 && ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
        mse,
        rmse: mse.sqrt(),
        n,
        split_id: split_id.to_string(),
    }
}

/// R², MSE and RMSE of `yhat` against `y`.
pub fn compute_metrics(y: &[f64], yhat: &[f64]) -> Result<MetricsReport> {
    if y.len() != yhat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    if y.len() < 2 {
        return Err(Error::InvalidParam("metrics need at least 2 rows".into()));
    }
    if y.iter().chain(yhat).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric inputs".into()));
    }
    Ok(metrics_any(y, yhat, "all"))
}

/// Fold index per row: a seeded shuffle dealt round-robin into `k` folds.
pub fn kfold_assignment(n_rows: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n_rows {
        return Err(Error::InvalidParam(format!("k_folds = {k} outside [2, {n_rows}]")));
    }
    if n_rows - n_rows.div_ceil(k) < 2 {
        return Err(Error::InvalidParam(format!(
            "{k} folds over {n_rows} rows leave fewer than 2 training rows"
        )));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut rng::rng(rng::derive_named(seed, "kfold")));
    let mut fold = vec![0; n_rows];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<MetricsReport>,
    /// Metrics over all out-of-fold predictions together.
    pub pooled: MetricsReport,
    pub assignment: Vec<usize>,
}

impl CvReport {
    /// Mean of the defined per-fold R² values.
    pub fn mean_fold_r2(&self) -> Option<f64> {
        let v: Vec<f64> = self.folds.iter().filter_map(|f| f.r2).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Out-of-fold evaluation of `spec`. Each fold's model is seeded from `seed`
/// and the fold index.
pub fn kfold_cv(design: &Design, spec: &ModelSpec, k_folds: usize, seed: u64) -> Result<CvReport> {
    design.require_complete()?;
    let n = design.n_rows();
    let assignment = kfold_assignment(n, k_folds, seed)?;
    let mut oof = vec![0.0; n];
    let mut folds = Vec::with_capacity(k_folds);
    for f in 0..k_folds {
        let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
        let tr = design.select_rows(&train);
        let te = design.select_rows(&test);
        let model = spec.with_seed(rng::derive(seed, f as u64)).fit(&tr.x, &tr.y)?;
        let pred = model.predict(&te.x)?;
        for (&i, p) in test.iter().zip(&pred) {
            oof[i] = *p;
        }
        folds.push(metrics_any(&te.y, &pred, &format!("fold{f}")));
    }
    Ok(CvReport {
        folds,
        pooled: metrics_any(&design.y, &oof, "pooled"),
        assignment,
    })
}
