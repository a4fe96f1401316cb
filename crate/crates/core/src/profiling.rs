//! Descriptive statistics, a moment-based normality screen and WHO birth
//! weight classes.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{Column, Kind, Role, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n_observed: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); zero when n < 2.
    pub sd: f64,
    /// Adjusted Fisher-Pearson skewness; `None` when n < 3 or variance is zero.
    pub skewness: Option<f64>,
    /// Bias-adjusted excess kurtosis; `None` when n < 4 or variance is zero.
    pub excess_kurtosis: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl SummaryStats {
    pub fn is_zero_variance(&self) -> bool {
        self.sd == 0.0
    }
}

/// Statistics over the observed cells of `values`.
pub fn summarize(values: &[f64], observed: &[bool]) -> Result<SummaryStats> {
    let xs: Vec<f64> = values
        .iter()
        .zip(observed)
        .filter(|(_, o)| **o)
        .map(|(v, _)| *v)
        .collect();
    summarize_values(&xs)
}

pub fn summarize_column(column: &Column) -> Result<SummaryStats> {
    summarize(&column.values, &column.observed)
        .map_err(|_| Error::EmptyObserved(column.meta.name.clone()))
}

pub fn summarize_values(xs: &[f64]) -> Result<SummaryStats> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::EmptyObserved("no observed cells".into()));
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        min = min.min(x);
        max = max.max(x);
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let sd = if n > 1 { (m2 * nf / (nf - 1.0)).sqrt() } else { 0.0 };
    let degenerate = m2 <= 0.0 || min == max;
    let skewness = if n >= 3 && !degenerate {
        let g1 = m3 / m2.powf(1.5);
        Some(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0))
    } else {
        None
    };
    let excess_kurtosis = if n >= 4 && !degenerate {
        let g2 = m4 / (m2 * m2) - 3.0;
        Some(((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)))
    } else {
        None
    };
    Ok(SummaryStats {
        n_observed: n,
        mean,
        sd: if degenerate { 0.0 } else { sd },
        skewness,
        excess_kurtosis,
        min,
        max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normality {
    Normal,
    NonNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityTolerance {
    pub skew_tol: f64,
    pub kurt_tol: f64,
}

impl Default for NormalityTolerance {
    /// Conventional screening thresholds, not derived from any test.
    fn default() -> Self {
        NormalityTolerance {
            skew_tol: 0.5,
            kurt_tol: 1.0,
        }
    }
}

/// Normal iff both |skewness| and |excess kurtosis| are within tolerance.
/// Undefined moments classify as non-normal.
pub fn classify_normality(stats: &SummaryStats, skew_tol: f64, kurt_tol: f64) -> Normality {
    match (stats.skewness, stats.excess_kurtosis) {
        (Some(s), Some(k)) if s.abs() <= skew_tol && k.abs() <= kurt_tol => Normality::Normal,
        _ => Normality::NonNormal,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightClass {
    VeryLow,
    ModeratelyLow,
    Normal,
    High,
}

/// WHO birth weight class in grams. 1500 and 2500 belong to the higher class,
/// 4000 is still normal.
pub fn who_bw_class(weight_g: f64) -> Result<WeightClass> {
    if weight_g.is_nan() || weight_g <= 0.0 {
        return Err(Error::InvalidParam(format!("weight {weight_g} g is not positive")));
    }
    Ok(if weight_g < 1500.0 {
        WeightClass::VeryLow
    } else if weight_g < 2500.0 {
        WeightClass::ModeratelyLow
    } else if weight_g <= 4000.0 {
        WeightClass::Normal
    } else {
        WeightClass::High
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousProfile {
    pub name: String,
    pub stats: Option<SummaryStats>,
    pub normality: Normality,
    pub zero_variance: bool,
    pub missing_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub code: u64,
    pub label: Option<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteProfile {
    pub name: String,
    pub kind: Kind,
    pub frequencies: Vec<CategoryCount>,
    pub zero_variance: bool,
    pub missing_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetProfile {
    pub name: String,
    pub stats: SummaryStats,
    pub normality: Normality,
    /// Counts per WHO class; only meaningful when the target is in grams.
    pub weight_classes: BTreeMap<WeightClass, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub n_rows: usize,
    /// Continuous/discrete counts include the target column.
    pub n_continuous: usize,
    pub n_discrete: usize,
    pub n_normal: usize,
    pub n_non_normal: usize,
    pub dataset_missing_pct: f64,
    pub tolerance: NormalityTolerance,
    pub continuous: Vec<ContinuousProfile>,
    pub discrete: Vec<DiscreteProfile>,
    pub target: Option<TargetProfile>,
}

fn frequencies(c: &Column) -> Vec<CategoryCount> {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for v in c.observed_values() {
        *counts.entry(v as u64).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(code, count)| CategoryCount {
            code,
            label: c.labels.as_ref().and_then(|l| l.get(code as usize).cloned()),
            count,
        })
        .collect()
}

/// Profiles every non-excluded column. Feature entries go to `continuous` /
/// `discrete`; the target gets its own entry with WHO class counts.
pub fn profile_table(table: &Table, tol: NormalityTolerance) -> ProfileReport {
    let mut report = ProfileReport {
        n_rows: table.n_rows(),
        n_continuous: 0,
        n_discrete: 0,
        n_normal: 0,
        n_non_normal: 0,
        dataset_missing_pct: 100.0 * table.dataset_missing_fraction(),
        tolerance: tol,
        continuous: Vec::new(),
        discrete: Vec::new(),
        target: None,
    };
    for c in table.columns() {
        if c.meta.role == Role::Excluded {
            continue;
        }
        if c.meta.kind.is_discrete() {
            report.n_discrete += 1;
        } else {
            report.n_continuous += 1;
        }
        if c.meta.role == Role::Target {
            if let Ok(stats) = summarize_column(c) {
                let normality = classify_normality(&stats, tol.skew_tol, tol.kurt_tol);
                let mut classes = BTreeMap::new();
                for v in c.observed_values() {
                    if let Ok(k) = who_bw_class(v) {
                        *classes.entry(k).or_default() += 1;
                    }
                }
                report.target = Some(TargetProfile {
                    name: c.meta.name.clone(),
                    stats,
                    normality,
                    weight_classes: classes,
                });
            }
            continue;
        }
        if c.meta.kind.is_discrete() {
            let frequencies = frequencies(c);
            report.discrete.push(DiscreteProfile {
                name: c.meta.name.clone(),
                kind: c.meta.kind,
                zero_variance: frequencies.len() <= 1,
                frequencies,
                missing_fraction: c.meta.missing_fraction,
            });
        } else {
            let stats = summarize_column(c).ok();
            let normality = stats
                .as_ref()
                .map_or(Normality::NonNormal, |s| classify_normality(s, tol.skew_tol, tol.kurt_tol));
            match normality {
                Normality::Normal => report.n_normal += 1,
                Normality::NonNormal => report.n_non_normal += 1,
            }
            report.continuous.push(ContinuousProfile {
                name: c.meta.name.clone(),
                zero_variance: stats.as_ref().is_none_or(SummaryStats::is_zero_variance),
                stats,
                normality,
                missing_fraction: c.meta.missing_fraction,
            });
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram over [min, max]; the last bin is closed.
pub fn histogram(xs: &[f64], n_bins: usize) -> Result<Histogram> {
    if xs.is_empty() || n_bins == 0 {
        return Err(Error::InvalidParam("histogram needs data and at least one bin".into()));
    }
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if max > min { (min, max) } else { (min - 0.5, min + 0.5) };
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; n_bins];
    for &x in xs {
        let b = (((x - lo) / width).floor() as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

pub fn write_histogram_csv<W: Write>(h: &Histogram, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for (i, c) in h.counts.iter().enumerate() {
        w.write_record([
            h.edges[i].to_string(),
            h.edges[i + 1].to_string(),
            c.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<histogram csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::ColumnMeta;

    #[test]
    fn three_point_summary() {
        let s = summarize_values(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.sd - 1.0).abs() < 1e-15);
        assert_eq!(s.skewness, Some(0.0));
        assert_eq!(s.excess_kurtosis, None);
        assert_eq!((s.min, s.max), (1.0, 3.0));
    }

    #[test]
    fn symmetric_sample_has_zero_skew() {
        let s = summarize_values(&[-4.5, 0.0, 4.5]).unwrap();
        assert_eq!(s.skewness, Some(0.0));
    }

    #[test]
    fn all_missing_is_error() {
        assert!(summarize(&[1.0, 2.0], &[false, false]).is_err());
    }

    #[test]
    fn normality_rules() {
        let s = SummaryStats {
            n_observed: 10,
            mean: 0.0,
            sd: 1.0,
            skewness: Some(0.0),
            excess_kurtosis: Some(0.0),
            min: -1.0,
            max: 1.0,
        };
        assert_eq!(classify_normality(&s, 1e-3, 1e-3), Normality::Normal);
        let skewed = SummaryStats {
            skewness: Some(3.0),
            ..s
        };
        assert_eq!(classify_normality(&skewed, 0.5, 1.0), Normality::NonNormal);
    }

    #[test]
    fn who_classes() {
        assert_eq!(who_bw_class(3000.0).unwrap(), WeightClass::Normal);
        assert_eq!(who_bw_class(2000.0).unwrap(), WeightClass::ModeratelyLow);
        assert_eq!(who_bw_class(1500.0).unwrap(), WeightClass::ModeratelyLow);
        assert_eq!(who_bw_class(1499.9).unwrap(), WeightClass::VeryLow);
        assert_eq!(who_bw_class(2500.0).unwrap(), WeightClass::Normal);
        assert_eq!(who_bw_class(4000.0).unwrap(), WeightClass::Normal);
        assert_eq!(who_bw_class(4000.1).unwrap(), WeightClass::High);
        assert!(who_bw_class(0.0).is_err());
        assert!(who_bw_class(-5.0).is_err());
    }

    #[test]
    fn constant_column_flagged() {
        let t = Table::new(vec![
            Column::complete(ColumnMeta::new("c", Kind::Continuous), vec![2.0; 5]),
            Column::complete(
                ColumnMeta::new("y", Kind::Continuous).with_role(Role::Target),
                vec![3000.0, 2000.0, 1000.0, 4500.0, 2600.0],
            ),
        ])
        .unwrap();
        let r = profile_table(&t, NormalityTolerance::default());
        assert!(r.continuous[0].zero_variance);
        assert_eq!(r.n_continuous, 2);
        let classes = &r.target.as_ref().unwrap().weight_classes;
        assert_eq!(classes[&WeightClass::Normal], 2);
        assert_eq!(classes[&WeightClass::High], 1);
    }

    #[test]
    fn target_only_table_has_no_feature_entries() {
        let t = Table::new(vec![Column::complete(
            ColumnMeta::new("y", Kind::Continuous).with_role(Role::Target),
            vec![1.0, 2.0, 3.0],
        )])
        .unwrap();
        let r = profile_table(&t, NormalityTolerance::default());
        assert!(r.continuous.is_empty() && r.discrete.is_empty());
    }

    #[test]
    fn histogram_counts_sum() {
        let h = histogram(&[0.0, 0.5, 1.0, 1.0, 2.0], 4).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), 5);
        assert_eq!(h.edges.len(), 5);
        assert_eq!(h.counts[3], 1);
    }
}
