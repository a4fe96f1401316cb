use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{FittedModel, Regressor, TreeEnsemble};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// Equally spaced points between the 1st and 99th percentiles.
    Points(usize),
    Explicit(Vec<f64>),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Points(50)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpCurve {
    pub feature: String,
    pub grid: Vec<f64>,
    pub mean_prediction: Vec<f64>,
    /// BART only: 5% and 95% quantiles of the per-draw curves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<(Vec<f64>, Vec<f64>)>,
}

impl PdpCurve {
    pub fn write_csv<W: std::io::Write>(curves: &[PdpCurve], w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["feature", "grid", "mean_prediction", "lower", "upper"])?;
        for c in curves {
            for (g, v) in c.grid.iter().enumerate() {
                let (lo, hi) = match &c.band {
                    Some((l, h)) => (l[g].to_string(), h[g].to_string()),
                    None => (String::new(), String::new()),
                };
                w.write_record([c.feature.clone(), c.grid[g].to_string(), v.to_string(), lo, hi])?;
            }
        }
        w.flush().map_err(|e| Error::io("<pdp csv>", e))
    }
}

pub fn make_grid(column: &[f64], spec: &GridSpec) -> Result<Vec<f64>> {
    match spec {
        GridSpec::Explicit(g) => {
            if g.is_empty() || g.windows(2).any(|w| !(w[0] < w[1])) || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParam("explicit grid must be finite and strictly increasing".into()));
            }
            Ok(g.clone())
        }
        GridSpec::Points(n) => {
            if *n == 0 {
                return Err(Error::InvalidParam("grid needs at least one point".into()));
            }
            let mut obs: Vec<f64> = column.iter().copied().filter(|v| v.is_finite()).collect();
            if obs.is_empty() {
                return Err(Error::EmptyObserved("pdp feature".into()));
            }
            obs.sort_by(f64::total_cmp);
            let lo = stats::quantile_sorted(&obs, 0.01);
            let hi = stats::quantile_sorted(&obs, 0.99);
            if *n == 1 || !(hi > lo) {
                return Ok(vec![lo]);
            }
            Ok((0..*n)
                .map(|g| lo + (hi - lo) * g as f64 / (*n - 1) as f64)
                .collect())
        }
    }
}

/// Curve of one tree ensemble. Trees that never split on `feature` add the
/// same amount at every grid point, so they are evaluated once per row.
fn ensemble_curve(e: &TreeEnsemble, x: &Matrix, feature: usize, grid: &[f64]) -> Vec<f64> {
    let (uses, rest): (Vec<_>, Vec<_>) = e.trees.iter().partition(|t| t.split_features().any(|f| f == feature));
    let n = x.n_rows();
    let fixed: f64 = (0..n)
        .map(|i| rest.iter().map(|t| t.predict_row(x.row(i))).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    let mut row = vec![0.0; x.n_cols()];
    grid.iter()
        .map(|&g| {
            let mut s = 0.0;
            for i in 0..n {
                row.copy_from_slice(x.row(i));
                row[feature] = g;
                s += uses.iter().map(|t| t.predict_row(&row)).sum::<f64>();
            }
            e.base_prediction + e.learning_rate * (fixed + s / n as f64)
        })
        .collect()
}

fn generic_curve(model: &dyn Regressor, x: &Matrix, feature: usize, grid: &[f64]) -> Vec<f64> {
    let n = x.n_rows();
    let mut row = vec![0.0; x.n_cols()];
    grid.iter()
        .map(|&g| {
            let mut s = 0.0;
            for i in 0..n {
                row.copy_from_slice(x.row(i));
                row[feature] = g;
                s += model.predict_row(&row);
            }
            s / n as f64
        })
        .collect()
}

/// Partial dependence: mean prediction over the rows of `x` with `feature`
/// forced to each grid value. For BART the curve is the mean of the per-draw
/// curves and carries a 90% band.
pub fn pdp(model: &FittedModel, x: &Matrix, feature: usize, name: &str, grid: &GridSpec) -> Result<PdpCurve> {
    if x.n_rows() == 0 {
        return Err(Error::InvalidParam("pdp needs at least one row".into()));
    }
    if x.n_cols() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: x.n_cols(),
        });
    }
    if feature >= x.n_cols() {
        return Err(Error::UnknownColumn(name.to_string()));
    }
    let grid = make_grid(&x.column(feature), grid)?;
    let (mean_prediction, band) = match model {
        FittedModel::Gbr(e) => (ensemble_curve(e, x, feature, &grid), None),
        FittedModel::Linear(m) => (generic_curve(m, x, feature, &grid), None),
        FittedModel::Bart(b) => {
            let per_draw: Vec<Vec<f64>> = b
                .draws
                .par_iter()
                .map(|d| ensemble_curve(d, x, feature, &grid))
                .collect();
            let m = per_draw.len() as f64;
            let mean = (0..grid.len())
                .map(|g| per_draw.iter().map(|c| c[g]).sum::<f64>() / m)
                .collect();
            let (lo, hi): (Vec<f64>, Vec<f64>) = (0..grid.len())
                .map(|g| {
                    let mut v: Vec<f64> = per_draw.iter().map(|c| c[g]).collect();
                    v.sort_by(f64::total_cmp);
                    (stats::quantile_sorted(&v, 0.05), stats::quantile_sorted(&v, 0.95))
                })
                .unzip();
            (mean, Some((lo, hi)))
        }
    };
    Ok(PdpCurve {
        feature: name.to_string(),
        grid,
        mean_prediction,
        band,
    })
}
