//! Scores read off fitted models: penalised linear coefficients and tree gain.

use serde::{Deserialize, Serialize};

use super::ranking::SelectorRanking;
use crate::error::{Error, Result};
use crate::evaluation::kfold_assignment;
use crate::matrix::Design;
use crate::models::linear::{fit_linear_with, CdConfig};
use crate::models::{fit_gbr, GbrParams, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddedMethod {
    Lasso,
    Ridge,
    ElasticNet,
    TreeGain,
}

impl EmbeddedMethod {
    pub fn id(self) -> &'static str {
        match self {
            EmbeddedMethod::Lasso => "lasso",
            EmbeddedMethod::Ridge => "ridge",
            EmbeddedMethod::ElasticNet => "elastic_net",
            EmbeddedMethod::TreeGain => "tree_gain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddedConfig {
    /// Per-row penalty λ; `None` picks it by k-fold CV over a log grid.
    pub penalty: Option<f64>,
    /// Share of λ applied as L1 for elastic net.
    pub l1_ratio: f64,
    pub cv_folds: usize,
    pub n_lambdas: usize,
    pub gbr: GbrParams,
    pub seed: u64,
}

impl Default for EmbeddedConfig {
    fn default() -> Self {
        EmbeddedConfig {
            penalty: None,
            l1_ratio: 0.5,
            cv_folds: 5,
            n_lambdas: 30,
            gbr: GbrParams::default(),
            seed: 0,
        }
    }
}

/// Split of λ into (l1 share, l2 share) for a method.
fn mix(method: EmbeddedMethod, l1_ratio: f64) -> (f64, f64) {
    match method {
        EmbeddedMethod::Lasso => (1.0, 0.0),
        EmbeddedMethod::Ridge => (0.0, 1.0),
        _ => (l1_ratio, 1.0 - l1_ratio),
    }
}

fn fit_at(design: &Design, lambda: f64, (a, b): (f64, f64), warm: Option<&[f64]>) -> Result<LinearModel> {
    let n = design.n_rows() as f64;
    fit_linear_with(
        &design.x,
        &design.y,
        lambda * a * n,
        lambda * b * n,
        CdConfig::default(),
        warm,
    )
}

/// Descending log grid of per-row penalties. For L1 it starts at the smallest
/// λ that zeroes every coefficient and spans three decades; pure ridge spans
/// 1e-3..1e3.
pub fn lambda_grid(design: &Design, method: EmbeddedMethod, l1_ratio: f64, n_lambdas: usize) -> Vec<f64> {
    let (a, _) = mix(method, l1_ratio);
    let n = design.n_rows() as f64;
    let (hi, lo) = if a > 0.0 {
        let ymean = design.y.iter().sum::<f64>() / n;
        let mut lmax: f64 = 0.0;
        for j in 0..design.n_features() {
            let c = design.x.column(j);
            let m = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            if sd <= 0.0 {
                continue;
            }
            let g: f64 = c.iter().zip(&design.y).map(|(v, y)| (v - m) / sd * (y - ymean)).sum();
            lmax = lmax.max(g.abs() / (n * a));
        }
        let lmax = lmax.max(1e-12);
        (lmax, lmax * 1e-3)
    } else {
        (1e3, 1e-3)
    };
    let steps = n_lambdas.max(2) - 1;
    (0..=steps)
        .map(|i| (hi.ln() + (lo.ln() - hi.ln()) * i as f64 / steps as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPath {
    pub lambdas: Vec<f64>,
    pub cv_mse: Vec<f64>,
    pub chosen: f64,
}

/// k-fold CV over the grid with warm starts along the path; the smallest
/// mean out-of-fold MSE wins (ties to the larger penalty).
pub fn cv_penalty(design: &Design, method: EmbeddedMethod, config: &EmbeddedConfig) -> Result<PenaltyPath> {
    let lambdas = lambda_grid(design, method, config.l1_ratio, config.n_lambdas);
    let n = design.n_rows();
    let assignment = kfold_assignment(n, config.cv_folds, config.seed)?;
    let m = mix(method, config.l1_ratio);
    let mut sse = vec![0.0; lambdas.len()];
    for f in 0..config.cv_folds {
        let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
        let tr = design.select_rows(&train);
        let te = design.select_rows(&test);
        let mut warm: Option<Vec<f64>> = None;
        for (l, &lambda) in lambdas.iter().enumerate() {
            let model = fit_at(&tr, lambda, m, warm.as_deref())?;
            sse[l] += (0..te.n_rows())
                .map(|i| (te.y[i] - model.predict_row(te.x.row(i))).powi(2))
                .sum::<f64>();
            warm = Some(model.coefficients);
        }
    }
    let cv_mse: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
    let mut best = 0;
    for (l, v) in cv_mse.iter().enumerate() {
        if *v < cv_mse[best] {
            best = l;
        }
    }
    Ok(PenaltyPath {
        chosen: lambdas[best],
        lambdas,
        cv_mse,
    })
}

/// Penalised linear fit at the configured (or CV-chosen) penalty.
pub fn fit_penalized(design: &Design, method: EmbeddedMethod, config: &EmbeddedConfig) -> Result<LinearModel> {
    if method == EmbeddedMethod::TreeGain {
        return Err(Error::InvalidParam("tree_gain is not a linear method".into()));
    }
    if !(0.0..=1.0).contains(&config.l1_ratio) {
        return Err(Error::InvalidParam(format!("l1_ratio {} outside [0, 1]", config.l1_ratio)));
    }
    let lambda = match config.penalty {
        Some(l) if l >= 0.0 => l,
        Some(l) => return Err(Error::InvalidParam(format!("penalty {l} is negative"))),
        None => cv_penalty(design, method, config)?.chosen,
    };
    fit_at(design, lambda, mix(method, config.l1_ratio), None)
}

/// |standardised coefficient| for the linear methods, total split gain for
/// `tree_gain`.
pub fn embedded_scores(design: &Design, method: EmbeddedMethod, config: &EmbeddedConfig) -> Result<SelectorRanking> {
    design.require_complete()?;
    let scores = match method {
        EmbeddedMethod::TreeGain => fit_gbr(&design.x, &design.y, &config.gbr)?.feature_gain(),
        _ => fit_penalized(design, method, config)?.importance(),
    };
    Ok(SelectorRanking::from_scores(method.id(), &design.names, &scores))
}
