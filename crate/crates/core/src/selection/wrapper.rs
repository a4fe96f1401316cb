//! Model-in-the-loop selectors: forward selection, RFE, Boruta.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::ranking::SelectorRanking;
use crate::error::{Error, Result};
use crate::evaluation::kfold_cv;
use crate::matrix::{Design, Matrix};
use crate::models::{fit_gbr, GbrParams, ModelSpec};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardStep {
    pub feature: String,
    /// Mean cross-validated R² after adding the feature.
    pub cv_r2: f64,
}

fn cv_r2(design: &Design, spec: &ModelSpec, folds: usize, seed: u64) -> Result<f64> {
    let report = kfold_cv(design, spec, folds, seed)?;
    Ok(report.mean_fold_r2().unwrap_or(f64::NEG_INFINITY))
}

/// Greedy forward selection on mean k-fold R². Starts from an empty set scored
/// 0 and stops at `k` features or when no candidate strictly improves the
/// score. All candidates are evaluated on the same folds.
pub fn forward_select(
    design: &Design,
    spec: &ModelSpec,
    k: usize,
    cv_folds: usize,
    seed: u64,
) -> Result<Vec<ForwardStep>> {
    let p = design.n_features();
    if k == 0 || k > p {
        return Err(Error::InvalidParam(format!("k = {k} outside 1..={p}")));
    }
    design.require_complete()?;
    let mut chosen: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    let mut current = 0.0;
    while chosen.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..p).filter(|j| !chosen.contains(j)) {
            let mut cols = chosen.clone();
            cols.push(j);
            let score = cv_r2(&design.select_features(&cols), spec, cv_folds, seed)?;
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        match best {
            Some((j, score)) if score > current => {
                chosen.push(j);
                current = score;
                steps.push(ForwardStep {
                    feature: design.names[j].clone(),
                    cv_r2: score,
                });
            }
            _ => break,
        }
    }
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    pub selected: Vec<String>,
    /// Eliminated features, earliest first.
    pub eliminated: Vec<String>,
}

impl RfeResult {
    /// Survivors score highest; eliminated features score by how long they lasted.
    pub fn ranking(&self, design: &Design) -> SelectorRanking {
        let total = self.eliminated.len() + self.selected.len();
        let scores: Vec<f64> = design
            .names
            .iter()
            .map(|n| match self.eliminated.iter().position(|e| e == n) {
                Some(pos) => (pos + 1) as f64,
                None => total as f64,
            })
            .collect();
        SelectorRanking::from_scores("rfe", &design.names, &scores)
    }
}

/// Recursive feature elimination: refit, drop the `step` least important
/// features (the last round is clamped to land on `k`), repeat. Equal
/// importances drop the later column first.
pub fn rfe(design: &Design, spec: &ModelSpec, k: usize, step: usize) -> Result<RfeResult> {
    let p = design.n_features();
    if k == 0 || k >= p {
        return Err(Error::InvalidParam(format!("k = {k} must lie in 1..{p}")));
    }
    if step == 0 {
        return Err(Error::InvalidParam("step must be at least 1".into()));
    }
    design.require_complete()?;
    let mut alive: Vec<usize> = (0..p).collect();
    let mut eliminated = Vec::new();
    while alive.len() > k {
        let sub = design.select_features(&alive);
        let imp = spec.fit(&sub.x, &sub.y)?.importance();
        let mut order: Vec<usize> = (0..alive.len()).collect();
        order.sort_by(|&a, &b| imp[a].total_cmp(&imp[b]).then(b.cmp(&a)));
        let drop = step.min(alive.len() - k);
        let mut gone: Vec<usize> = order[..drop].to_vec();
        for &g in &gone {
            eliminated.push(design.names[alive[g]].clone());
        }
        gone.sort_unstable();
        for g in gone.into_iter().rev() {
            alive.remove(g);
        }
    }
    Ok(RfeResult {
        selected: alive.iter().map(|&j| design.names[j].clone()).collect(),
        eliminated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Confirmed,
    Tentative,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVerdict {
    pub feature: String,
    pub decision: Decision,
    pub hits: usize,
    /// Rounds the feature took part in.
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorutaVerdict {
    pub verdicts: Vec<FeatureVerdict>,
    pub n_rounds: usize,
    pub alpha: f64,
}

impl BorutaVerdict {
    pub fn with(&self, decision: Decision) -> Vec<String> {
        self.verdicts
            .iter()
            .filter(|v| v.decision == decision)
            .map(|v| v.feature.clone())
            .collect()
    }

    /// Confirmed above tentative above rejected, then by hit rate.
    pub fn ranking(&self) -> SelectorRanking {
        let names: Vec<String> = self.verdicts.iter().map(|v| v.feature.clone()).collect();
        let scores: Vec<f64> = self
            .verdicts
            .iter()
            .map(|v| {
                let tier = match v.decision {
                    Decision::Confirmed => 2.0,
                    Decision::Tentative => 1.0,
                    Decision::Rejected => 0.0,
                };
                tier + v.hits as f64 / v.rounds.max(1) as f64
            })
            .collect();
        SelectorRanking::from_scores("boruta", &names, &scores)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BorutaConfig {
    pub gbr: GbrParams,
    pub alpha: f64,
    pub max_rounds: usize,
    /// Lower bound on the shadow pool; small feature sets get several
    /// permuted copies per feature.
    pub min_shadows: usize,
    pub seed: u64,
}

impl Default for BorutaConfig {
    fn default() -> Self {
        BorutaConfig {
            gbr: GbrParams {
                n_iterations: 100,
                max_depth: 3,
                learning_rate: 0.1,
                subsample_fraction: 0.5,
                ..GbrParams::default()
            },
            alpha: 0.05,
            max_rounds: 50,
            min_shadows: 100,
            seed: 0,
        }
    }
}

/// Boruta with gradient-boosting gain. Each round appends row-permuted shadows
/// of the non-constant features (at least `min_shadows`, cycling through the
/// features), reshuffled per round; a hit is gain strictly above the best
/// shadow. After each round an undecided feature with
/// `h` hits in `r` rounds is confirmed when P(X ≥ h) and rejected when
/// P(X ≤ h) under Binomial(r, 1/2) falls below alpha/2, Bonferroni-divided by
/// the number of tested features. Decided features stay in
/// the model so the shadow pool never shrinks; zero-variance features are
/// rejected up front.
pub fn boruta(design: &Design, config: &BorutaConfig) -> Result<BorutaVerdict> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidParam(format!("alpha {} outside (0, 1)", config.alpha)));
    }
    if config.max_rounds == 0 {
        return Err(Error::InvalidParam("max_rounds must be at least 1".into()));
    }
    design.require_complete()?;
    let p = design.n_features();
    let cols = design.x.columns();
    let mut verdicts: Vec<FeatureVerdict> = design
        .names
        .iter()
        .map(|name| FeatureVerdict {
            feature: name.clone(),
            decision: Decision::Tentative,
            hits: 0,
            rounds: 0,
        })
        .collect();
    let constant: Vec<bool> = cols.iter().map(|c| c.iter().all(|x| *x == c[0])).collect();
    for (v, &c) in verdicts.iter_mut().zip(&constant) {
        if c {
            v.decision = Decision::Rejected;
        }
    }
    let mut undecided: Vec<bool> = verdicts.iter().map(|v| v.decision == Decision::Tentative).collect();
    let tested = constant.iter().filter(|c| !**c).count();
    let level = config.alpha / 2.0 / tested.max(1) as f64;
    let mut n_rounds = 0;
    for round in 0..config.max_rounds {
        if !undecided.iter().any(|&u| u) || tested == 0 {
            break;
        }
        n_rounds += 1;
        let active: Vec<usize> = (0..p).filter(|&j| !constant[j]).collect();
        let mut r = rng::rng(rng::derive(config.seed, round as u64));
        let mut all: Vec<Vec<f64>> = active.iter().map(|&j| cols[j].clone()).collect();
        let n_shadows = active.len().max(config.min_shadows);
        for k in 0..n_shadows {
            let mut s = cols[active[k % active.len()]].clone();
            s.shuffle(&mut r);
            all.push(s);
        }
        let x = Matrix::from_columns(&all)?;
        let params = GbrParams {
            seed: rng::derive_named(rng::derive(config.seed, round as u64), "boruta-gbr"),
            ..config.gbr
        };
        let gain = fit_gbr(&x, &design.y, &params)?.feature_gain();
        let m = active.len();
        let shadow_max = gain[m..].iter().copied().fold(0.0, f64::max);
        for (pos, &j) in active.iter().enumerate() {
            if !undecided[j] {
                continue;
            }
            let v = &mut verdicts[j];
            v.rounds += 1;
            if gain[pos] > shadow_max {
                v.hits += 1;
            }
            let b = Binomial::new(0.5, v.rounds as u64).map_err(|e| Error::InvalidParam(e.to_string()))?;
            let upper = if v.hits == 0 { 1.0 } else { b.sf(v.hits as u64 - 1) };
            let lower = b.cdf(v.hits as u64);
            if upper < level {
                v.decision = Decision::Confirmed;
                undecided[j] = false;
            } else if lower < level {
                v.decision = Decision::Rejected;
                undecided[j] = false;
            }
        }
    }
    Ok(BorutaVerdict {
        verdicts,
        n_rounds,
        alpha: config.alpha,
    })
}
