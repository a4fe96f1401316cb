use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::compute_metrics;
use crate::matrix::Matrix;
use crate::models::Regressor;
use crate::rng;
use crate::selection::SelectorRanking;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMetric {
    Rmse,
    R2,
}

fn loss(metric: PermutationMetric, y: &[f64], yhat: &[f64]) -> Result<f64> {
    let m = compute_metrics(y, yhat)?;
    Ok(match metric {
        PermutationMetric::Rmse => m.rmse,
        PermutationMetric::R2 => -m.r2.ok_or_else(|| Error::Degenerate("constant target".into()))?,
    })
}

/// Mean metric degradation when one column is row-permuted, over
/// `n_repeats` shuffles seeded per (feature, repeat).
pub fn permutation_importance(
    model: &dyn Regressor,
    x: &Matrix,
    y: &[f64],
    names: &[String],
    metric: PermutationMetric,
    n_repeats: usize,
    seed: u64,
) -> Result<SelectorRanking> {
    if n_repeats == 0 {
        return Err(Error::InvalidParam("n_repeats must be at least 1".into()));
    }
    if names.len() != x.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: x.n_cols(),
            got: names.len(),
        });
    }
    let base = loss(metric, y, &model.predict(x)?)?;
    let scores = (0..x.n_cols())
        .into_par_iter()
        .map(|j| {
            let mut xp = x.clone();
            let col = x.column(j);
            let mut total = 0.0;
            for r in 0..n_repeats {
                let mut c = col.clone();
                c.shuffle(&mut rng::rng(rng::derive(rng::derive(seed, j as u64), r as u64)));
                xp.set_column(j, &c);
                total += loss(metric, y, &model.predict(&xp)?)? - base;
            }
            Ok(total / n_repeats as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SelectorRanking::from_scores("permutation", names, &scores))
}
