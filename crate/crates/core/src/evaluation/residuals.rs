use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiling::{histogram, Histogram};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Silverman,
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub sample: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `y - yhat`.
    pub residuals: Vec<f64>,
    pub predicted: Vec<f64>,
    pub histogram: Histogram,
    pub kde: Option<Kde>,
    /// Standardized residual quantiles against standard normal quantiles at
    /// (i - 0.5) / n.
    pub qq: Vec<QqPoint>,
    pub skewness: Option<f64>,
    /// OLS slope of residual on prediction; near zero without systematic bias.
    pub slope_vs_predicted: Option<f64>,
    /// Set when the residuals have zero variance.
    pub degenerate: bool,
}

const KDE_POINTS: usize = 200;

pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sd = stats::sd_sample(xs);
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let iqr = stats::quantile_sorted(&s, 0.75) - stats::quantile_sorted(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian-kernel density on 200 points spanning the data +- 3 bandwidths.
pub fn kde(xs: &[f64], h: f64) -> Kde {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (KDE_POINTS - 1) as f64;
    let norm = 1.0 / (xs.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid: Vec<f64> = (0..KDE_POINTS).map(|g| lo + step * g as f64).collect();
    let density = grid
        .iter()
        .map(|&g| norm * xs.iter().map(|x| (-0.5 * ((g - x) / h).powi(2)).exp()).sum::<f64>())
        .collect();
    Kde { bandwidth: h, grid, density }
}

pub fn residual_report(y: &[f64], yhat: &[f64], n_bins: usize, bandwidth: Bandwidth) -> Result<ResidualReport> {
    if y.len() != yhat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    if y.len() < 3 {
        return Err(Error::InvalidParam("residual report needs at least 3 rows".into()));
    }
    let residuals: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| a - b).collect();
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("residuals".into()));
    }
    let n = residuals.len();
    let mean = stats::mean(&residuals);
    let sd = stats::sd_sample(&residuals);
    let degenerate = !(sd > 0.0);
    let hist = histogram(&residuals, n_bins)?;
    let summary = crate::profiling::summarize_values(&residuals)?;

    let (kde_out, qq) = if degenerate {
        (None, Vec::new())
    } else {
        let h = match bandwidth {
            Bandwidth::Silverman => silverman_bandwidth(&residuals),
            Bandwidth::Explicit(h) if h > 0.0 => h,
            Bandwidth::Explicit(h) => return Err(Error::InvalidParam(format!("bandwidth {h} must be positive"))),
        };
        let mut z: Vec<f64> = residuals.iter().map(|r| (r - mean) / sd).collect();
        z.sort_by(f64::total_cmp);
        let qq = z
            .iter()
            .enumerate()
            .map(|(i, &s)| QqPoint {
                theoretical: stats::normal_quantile((i as f64 + 0.5) / n as f64),
                sample: s,
            })
            .collect();
        (Some(kde(&residuals, h)), qq)
    };
    let slope = {
        let pm = stats::mean(yhat);
        let sxx: f64 = yhat.iter().map(|p| (p - pm).powi(2)).sum();
        (sxx > 0.0).then(|| yhat.iter().zip(&residuals).map(|(p, r)| (p - pm) * (r - mean)).sum::<f64>() / sxx)
    };
    Ok(ResidualReport {
        residuals,
        predicted: yhat.to_vec(),
        histogram: hist,
        kde: kde_out,
        qq,
        skewness: if degenerate { None } else { summary.skewness },
        slope_vs_predicted: slope,
        degenerate,
    })
}

/// Plotting positions outside this central band are ignored by
/// [`ResidualReport::qq_max_abs_deviation`]: the extreme order statistics of a
/// normal sample of 5,000 have a standard deviation near 0.3 on their own.
pub const QQ_CENTRAL_BAND: (f64, f64) = (0.05, 0.95);

impl ResidualReport {
    /// Largest |sample − theoretical| over the Q-Q points whose plotting
    /// position (i − 0.5)/n lies in [`QQ_CENTRAL_BAND`].
    pub fn qq_max_abs_deviation(&self) -> Option<f64> {
        let n = self.qq.len() as f64;
        let (lo, hi) = QQ_CENTRAL_BAND;
        let central: Vec<f64> = self
            .qq
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let p = (*i as f64 + 0.5) / n;
                p >= lo && p <= hi
            })
            .map(|(_, q)| (q.sample - q.theoretical).abs())
            .collect();
        (!central.is_empty()).then(|| central.into_iter().fold(0.0, f64::max))
    }
}
