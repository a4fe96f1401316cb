//! Model-free scores on pairwise-complete rows.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ranking::SelectorRanking;
use crate::error::{Error, Result};
use crate::matrix::Design;
use crate::rng;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
    Kendall,
}

impl CorrelationMethod {
    pub fn id(self) -> &'static str {
        match self {
            CorrelationMethod::Pearson => "pearson",
            CorrelationMethod::Spearman => "spearman",
            CorrelationMethod::Kendall => "kendall",
        }
    }
}

fn complete_pairs(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    x.iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .unzip()
}

/// Kendall's tau-b.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    let denom = (((conc + disc + tx) as f64) * ((conc + disc + ty) as f64)).sqrt();
    (denom > 0.0).then(|| (conc - disc) as f64 / denom)
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    stats::pearson(&stats::average_ranks(x), &stats::average_ranks(y))
}

pub fn correlation(x: &[f64], y: &[f64], method: CorrelationMethod) -> Option<f64> {
    match method {
        CorrelationMethod::Pearson => stats::pearson(x, y),
        CorrelationMethod::Spearman => spearman(x, y),
        CorrelationMethod::Kendall => kendall_tau(x, y),
    }
}

fn per_feature<F>(design: &Design, score: F) -> Vec<(f64, bool)>
where
    F: Fn(&[f64]) -> (f64, bool) + Sync,
{
    (0..design.n_features())
        .into_par_iter()
        .map(|j| score(&design.x.column(j)))
        .collect()
}

fn ranking(method: &str, design: &Design, scored: Vec<(f64, bool)>) -> SelectorRanking {
    let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let flagged = design
        .names
        .iter()
        .zip(&scored)
        .filter(|(_, s)| s.1)
        .map(|(n, _)| n.clone())
        .collect();
    SelectorRanking::from_scores(method, &design.names, &scores).with_flagged(flagged)
}

/// |coefficient| per feature. Features with fewer than 3 complete pairs score
/// 0; zero-variance features score 0 and are flagged.
pub fn correlation_scores(design: &Design, method: CorrelationMethod) -> SelectorRanking {
    let scored = per_feature(design, |x| {
        let (a, b) = complete_pairs(x, &design.y);
        if a.len() < 3 {
            return (0.0, false);
        }
        match correlation(&a, &b, method) {
            Some(r) => (r.abs(), false),
            None => (0.0, true),
        }
    });
    ranking(method.id(), design, scored)
}

fn discretize(x: &[f64], discrete: bool, bins: usize) -> Vec<usize> {
    if discrete {
        // dense codes in sorted order of distinct values
        let mut distinct: Vec<f64> = x.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        x.iter().map(|v| distinct.partition_point(|d| d < v)).collect()
    } else {
        stats::equal_frequency_bins(x, bins)
    }
}

/// Plug-in mutual information in nats between two label vectors.
pub fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut pa: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pb: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0;
        *pa.entry(x).or_default() += 1.0;
        *pb.entry(y).or_default() += 1.0;
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| c / n * (c * n / (pa[&x] * pb[&y])).ln())
        .sum();
    mi.max(0.0)
}

/// MI between each feature and the target, continuous variables cut into
/// `bins` equal-frequency bins, discrete features used as-is.
pub fn mutual_information_scores(design: &Design, bins: usize) -> Result<SelectorRanking> {
    if bins < 2 {
        return Err(Error::InvalidParam("mutual information needs at least 2 bins".into()));
    }
    let scored: Vec<(f64, bool)> = (0..design.n_features())
        .into_par_iter()
        .map(|j| {
            let (x, y) = complete_pairs(&design.x.column(j), &design.y);
            if x.len() < 3 {
                return (0.0, false);
            }
            let a = discretize(&x, design.kinds[j].is_discrete(), bins);
            let b = discretize(&y, false, bins);
            (mutual_information(&a, &b), false)
        })
        .collect();
    Ok(ranking("mutual_information", design, scored))
}

/// Cap for F statistics whose within-group variance vanishes.
pub const F_CAP: f64 = 1e12;

/// One-way ANOVA F of `y` across `groups`. `None` for a single group; capped
/// (and flagged by the `bool`) when the groups have no within variance.
pub fn anova_f(groups: &[usize], y: &[f64]) -> (Option<f64>, bool) {
    let mut by: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for (&g, &v) in groups.iter().zip(y) {
        let e = by.entry(g).or_insert((0.0, 0.0, 0));
        e.0 += v;
        e.1 += v * v;
        e.2 += 1;
    }
    let k = by.len();
    let n = y.len();
    if k < 2 || n <= k {
        return (None, false);
    }
    let grand = y.iter().sum::<f64>() / n as f64;
    let (mut ssb, mut ssw) = (0.0, 0.0);
    for &(s, s2, c) in by.values() {
        let m = s / c as f64;
        ssb += c as f64 * (m - grand).powi(2);
        ssw += (s2 - s * m).max(0.0);
    }
    let msb = ssb / (k - 1) as f64;
    let msw = ssw / (n - k) as f64;
    let scale = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if msw <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        if msb > 0.0 {
            (Some(F_CAP), true)
        } else {
            (Some(0.0), false)
        }
    } else {
        (Some((msb / msw).min(F_CAP)), false)
    }
}

/// Between/within variance ratio of the target across the levels of each
/// discrete feature; continuous features are grouped into `bins`
/// equal-frequency bins first.
pub fn anova_f_scores(design: &Design, bins: usize) -> Result<SelectorRanking> {
    if bins < 2 {
        return Err(Error::InvalidParam("ANOVA grouping needs at least 2 bins".into()));
    }
    let scored: Vec<(f64, bool)> = (0..design.n_features())
        .into_par_iter()
        .map(|j| {
            let (x, y) = complete_pairs(&design.x.column(j), &design.y);
            let g = discretize(&x, design.kinds[j].is_discrete(), bins);
            let (f, capped) = anova_f(&g, &y);
            (f.unwrap_or(0.0), capped)
        })
        .collect();
    Ok(ranking("anova_f", design, scored))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReliefConfig {
    pub n_neighbors: usize,
    /// Rows sampled as reference instances; all rows when at least `n_rows`.
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for ReliefConfig {
    fn default() -> Self {
        ReliefConfig {
            n_neighbors: 10,
            n_samples: 1000,
            seed: 0,
        }
    }
}

/// RReliefF weights for a continuous target. Feature differences are
/// range-normalized (0/1 for discrete features); a missing cell contributes no
/// difference. Neighbours are the `n_neighbors` nearest rows under the summed
/// feature differences, ties to the lower row index, each weighted 1/k.
pub fn relief_f_scores(design: &Design, config: &ReliefConfig) -> Result<SelectorRanking> {
    let n = design.n_rows();
    let p = design.n_features();
    if config.n_neighbors == 0 || config.n_neighbors >= n {
        return Err(Error::InvalidParam(format!(
            "n_neighbors = {} outside [1, {}]",
            config.n_neighbors,
            n.saturating_sub(1)
        )));
    }
    let range = |v: &[f64]| {
        let (lo, hi) = v
            .iter()
            .filter(|x| x.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        if hi > lo {
            hi - lo
        } else {
            0.0
        }
    };
    let cols = design.x.columns();
    let ranges: Vec<f64> = cols.iter().map(|c| range(c)).collect();
    let y_range = range(&design.y);
    let diff = |j: usize, a: usize, b: usize| -> f64 {
        let (x, z) = (cols[j][a], cols[j][b]);
        if !(x.is_finite() && z.is_finite()) {
            0.0
        } else if design.kinds[j].is_discrete() {
            f64::from(u8::from(x != z))
        } else if ranges[j] > 0.0 {
            (x - z).abs() / ranges[j]
        } else {
            0.0
        }
    };
    let dy = |a: usize, b: usize| {
        if y_range > 0.0 {
            (design.y[a] - design.y[b]).abs() / y_range
        } else {
            0.0
        }
    };
    let m = config.n_samples.min(n);
    let refs: Vec<usize> = if m == n {
        (0..n).collect()
    } else {
        let mut r = rng::rng(config.seed);
        let mut s = sample(&mut r, n, m).into_vec();
        s.sort_unstable();
        s
    };
    let k = config.n_neighbors;
    // per reference: (N_dC, N_dA[], N_dCdA[])
    let parts: Vec<(f64, Vec<f64>, Vec<f64>)> = refs
        .par_iter()
        .map(|&r| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&s| s != r)
                .map(|s| ((0..p).map(|j| diff(j, r, s)).sum::<f64>(), s))
                .collect();
            d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let w = 1.0 / k as f64;
            let mut ndc = 0.0;
            let mut nda = vec![0.0; p];
            let mut ndcda = vec![0.0; p];
            for &(_, s) in &d[..k] {
                let c = dy(r, s);
                ndc += c * w;
                for j in 0..p {
                    let a = diff(j, r, s);
                    nda[j] += a * w;
                    ndcda[j] += c * a * w;
                }
            }
            (ndc, nda, ndcda)
        })
        .collect();
    let mut ndc = 0.0;
    let mut nda = vec![0.0; p];
    let mut ndcda = vec![0.0; p];
    for (c, a, ca) in parts {
        ndc += c;
        for j in 0..p {
            nda[j] += a[j];
            ndcda[j] += ca[j];
        }
    }
    let mf = m as f64;
    let scores: Vec<f64> = (0..p)
        .map(|j| {
            let first = if ndc > 0.0 { ndcda[j] / ndc } else { 0.0 };
            let second = if mf - ndc > 0.0 { (nda[j] - ndcda[j]) / (mf - ndc) } else { 0.0 };
            first - second
        })
        .collect();
    Ok(SelectorRanking::from_scores("relief_f", &design.names, &scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    #[test]
    fn small_coefficients() {
        assert!((stats::pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert!((kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn anova_cases() {
        let (f, capped) = anova_f(&[0, 0, 1, 1], &[0.0, 0.0, 10.0, 10.0]);
        assert_eq!((f, capped), (Some(F_CAP), true));
        let (f, _) = anova_f(&[0, 0, 1, 1], &[1.0, 3.0, 1.0, 3.0]);
        assert_eq!(f, Some(0.0));
        assert_eq!(anova_f(&[0, 0, 0], &[1.0, 2.0, 3.0]).0, None);
    }

    #[test]
    fn mi_of_identical_labels_is_entropy() {
        let a = [0, 0, 1, 1, 2, 2, 2, 2];
        let h: f64 = [0.25f64, 0.25, 0.5].iter().map(|p| -p * p.ln()).sum();
        assert!((mutual_information(&a, &a) - h).abs() < 1e-12);
    }

    #[test]
    fn few_pairs_score_zero_and_constant_flagged() {
        let x = Matrix::from_rows(&[
            vec![1.0, f64::NAN, 5.0],
            vec![2.0, f64::NAN, 5.0],
            vec![3.0, 1.0, 5.0],
            vec![4.0, 2.0, 5.0],
        ])
        .unwrap();
        let d = Design::from_parts(vec!["a".into(), "b".into(), "c".into()], x, vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        let r = correlation_scores(&d, CorrelationMethod::Pearson);
        assert_eq!(r.score_of("b"), Some(0.0));
        assert_eq!(r.score_of("c"), Some(0.0));
        assert_eq!(r.flagged, vec!["c".to_string()]);
        assert_eq!(r.top(1), vec!["a".to_string()]);
    }
}
