use std::collections::BTreeSet;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{predictor_columns, resolve_targets};
use crate::error::{Error, Result};
use crate::models::linalg::ridge_fit;
use crate::rng;
use crate::stats;
use crate::table::{Kind, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionalModel {
    /// Prediction plus Gaussian noise with the residual sd.
    RidgeLinear,
    /// A random draw among the `pmm_donors` observed cells whose predicted
    /// values are closest to the missing cell's prediction.
    PredictiveMeanMatching,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitOrder {
    DescendingMissingness,
    ColumnOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiceConfig {
    pub n_iterations: usize,
    pub n_imputations: usize,
    pub conditional_model: ConditionalModel,
    pub pmm_donors: usize,
    pub ridge: f64,
    pub visit_order: VisitOrder,
    /// Keep only this many predictors per column, those with the largest
    /// |correlation| on the column's observed rows. `None` uses all.
    pub max_predictors: Option<usize>,
    pub seed: u64,
}

impl Default for MiceConfig {
    fn default() -> Self {
        MiceConfig {
            n_iterations: 10,
            n_imputations: 5,
            conditional_model: ConditionalModel::PredictiveMeanMatching,
            pmm_donors: 5,
            ridge: 1e-6,
            visit_order: VisitOrder::DescendingMissingness,
            max_predictors: None,
            seed: 0,
        }
    }
}

impl MiceConfig {
    fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 || self.n_imputations == 0 || self.pmm_donors == 0 {
            return Err(Error::InvalidParam(
                "n_iterations, n_imputations and pmm_donors must be at least 1".into(),
            ));
        }
        if self.max_predictors == Some(0) {
            return Err(Error::InvalidParam("max_predictors must be at least 1".into()));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::InvalidParam("ridge must be non-negative".into()));
        }
        Ok(())
    }
}

struct Plan {
    /// Column index per predictor slot (table order).
    slots: Vec<usize>,
    /// Target slots in visit order, with their predictor slots and rows.
    visits: Vec<Visit>,
    /// Mean-filled starting values per slot.
    start: Vec<Vec<f64>>,
}

struct Visit {
    slot: usize,
    predictors: Vec<usize>,
    observed: Vec<usize>,
    missing: Vec<usize>,
}

fn plan(table: &Table, config: &MiceConfig, targets: &[usize]) -> Result<Plan> {
    let cols = table.columns();
    let mut slots = predictor_columns(table);
    for &t in targets {
        if !slots.contains(&t) {
            slots.push(t);
        }
    }
    slots.sort_unstable();
    let n = table.n_rows();
    let start: Vec<Vec<f64>> = slots
        .iter()
        .map(|&j| {
            let c = &cols[j];
            let obs = c.observed_values();
            let m = if obs.is_empty() { 0.0 } else { stats::mean(&obs) };
            (0..n).map(|i| if c.observed[i] { c.values[i] } else { m }).collect()
        })
        .collect();

    let mut order: Vec<usize> = targets.iter().copied().filter(|&j| cols[j].n_missing() > 0).collect();
    if config.visit_order == VisitOrder::DescendingMissingness {
        order.sort_by(|&a, &b| cols[b].n_missing().cmp(&cols[a].n_missing()).then(a.cmp(&b)));
    }
    let visits = order
        .into_iter()
        .map(|j| {
            let slot = slots.binary_search(&j).expect("target is a slot");
            let c = &cols[j];
            let observed: Vec<usize> = (0..n).filter(|&i| c.observed[i]).collect();
            let missing: Vec<usize> = (0..n).filter(|&i| !c.observed[i]).collect();
            let mut predictors: Vec<usize> = (0..slots.len()).filter(|&s| s != slot).collect();
            if let Some(cap) = config.max_predictors {
                if predictors.len() > cap {
                    let y: Vec<f64> = observed.iter().map(|&i| c.values[i]).collect();
                    let score = |s: usize| {
                        let x: Vec<f64> = observed.iter().map(|&i| start[s][i]).collect();
                        stats::pearson(&x, &y).map_or(0.0, f64::abs)
                    };
                    let mut scored: Vec<(f64, usize)> = predictors.iter().map(|&s| (score(s), s)).collect();
                    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                    predictors = scored.into_iter().take(cap).map(|(_, s)| s).collect();
                    predictors.sort_unstable();
                }
            }
            Visit {
                slot,
                predictors,
                observed,
                missing,
            }
        })
        .collect();
    Ok(Plan { slots, visits, start })
}

fn run_chain(plan: &Plan, config: &MiceConfig, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::rng(seed);
    let mut cur = plan.start.clone();
    for _ in 0..config.n_iterations {
        for v in &plan.visits {
            let xs: Vec<&[f64]> = v.predictors.iter().map(|&s| cur[s].as_slice()).collect();
            let y = &cur[v.slot];
            let (b0, b) = ridge_fit(&xs, y, &v.observed, config.ridge);
            let predict = |i: usize| b0 + xs.iter().zip(&b).map(|(x, c)| c * x[i]).sum::<f64>();
            let fills: Vec<f64> = match config.conditional_model {
                ConditionalModel::RidgeLinear => {
                    let sse: f64 = v.observed.iter().map(|&i| (y[i] - predict(i)).powi(2)).sum();
                    let dof = v.observed.len().saturating_sub(v.predictors.len() + 1);
                    let sd = (sse / dof.max(1) as f64).sqrt();
                    v.missing
                        .iter()
                        .map(|&i| {
                            let e: f64 = StandardNormal.sample(&mut r);
                            predict(i) + sd * e
                        })
                        .collect()
                }
                ConditionalModel::PredictiveMeanMatching => {
                    let mut donors: Vec<(f64, usize)> = v.observed.iter().map(|&i| (predict(i), i)).collect();
                    donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    let k = config.pmm_donors.min(donors.len());
                    v.missing
                        .iter()
                        .map(|&i| {
                            let p = predict(i);
                            // window of the k closest predictions around p
                            let pos = donors.partition_point(|d| d.0 < p);
                            let (mut lo, mut hi) = (pos, pos);
                            while hi - lo < k {
                                let take_left = match (lo > 0, hi < donors.len()) {
                                    (true, true) => (p - donors[lo - 1].0) <= (donors[hi].0 - p),
                                    (l, _) => l,
                                };
                                if take_left {
                                    lo -= 1;
                                } else {
                                    hi += 1;
                                }
                            }
                            let pick = donors[lo + r.random_range(0..k)].1;
                            y[pick]
                        })
                        .collect()
                }
            };
            let col = &mut cur[v.slot];
            for (&i, f) in v.missing.iter().zip(fills) {
                col[i] = f;
            }
        }
    }
    cur
}

/// Multiple imputation by chained equations over the listed continuous
/// columns. Each of the `n_imputations` chains starts from column means and
/// is seeded from `config.seed` and its chain index.
pub fn mice_impute(table: &Table, config: &MiceConfig, targets: &BTreeSet<String>) -> Result<Vec<Table>> {
    config.validate()?;
    let target_idx = resolve_targets(table, targets)?;
    let cols = table.columns();
    for &j in &target_idx {
        let c = &cols[j];
        if c.meta.kind != Kind::Continuous {
            return Err(Error::InvalidParam(format!("MICE column `{}` is not continuous", c.meta.name)));
        }
        if table.n_rows() - c.n_missing() < 2 {
            return Err(Error::EmptyObserved(format!("`{}` has fewer than 2 observed cells", c.meta.name)));
        }
    }
    let plan = plan(table, config, &target_idx)?;
    let chains: Vec<Vec<Vec<f64>>> = (0..config.n_imputations as u64)
        .into_par_iter()
        .map(|c| run_chain(&plan, config, rng::derive(config.seed, c)))
        .collect();
    chains
        .into_iter()
        .map(|values| {
            let mut columns = cols.to_vec();
            for v in &plan.visits {
                let j = plan.slots[v.slot];
                let c = &mut columns[j];
                for &i in &v.missing {
                    c.values[i] = values[v.slot][i];
                    c.observed[i] = true;
                    c.imputed[i] = true;
                }
            }
            Table::new(columns)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Column, ColumnMeta, Role};

    fn toy() -> Table {
        let n = 40;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + (v * 1.7).sin()).collect();
        let obs: Vec<bool> = (0..n).map(|i| i % 4 != 1).collect();
        Table::new(vec![
            Column::complete(ColumnMeta::new("t", Kind::Continuous).with_role(Role::Target), vec![0.0; n]),
            Column::complete(ColumnMeta::new("x", Kind::Continuous), x),
            Column::new(ColumnMeta::new("y", Kind::Continuous), y, obs),
        ])
        .unwrap()
    }

    #[test]
    fn complete_column_unchanged() {
        let t = toy();
        let targets = BTreeSet::from(["x".to_string(), "y".to_string()]);
        let out = mice_impute(&t, &MiceConfig::default(), &targets).unwrap();
        assert_eq!(out.len(), 5);
        for o in &out {
            assert_eq!(o.column("x").unwrap(), t.column("x").unwrap());
            assert_eq!(o.column("y").unwrap().n_missing(), 0);
        }
    }

    #[test]
    fn pmm_draws_observed_values() {
        let t = toy();
        let targets = BTreeSet::from(["y".to_string()]);
        let out = mice_impute(&t, &MiceConfig::default(), &targets).unwrap();
        let observed: Vec<f64> = t.column("y").unwrap().observed_values();
        for o in &out {
            let y = o.column("y").unwrap();
            for i in (0..40).filter(|i| i % 4 == 1) {
                assert!(observed.contains(&y.values[i]));
                // donors come from the neighbourhood of the prediction
                assert!((y.values[i] - 2.0 * i as f64).abs() < 12.0);
            }
        }
    }

    #[test]
    fn rejects_discrete_and_sparse() {
        let t = toy();
        let cfg = MiceConfig {
            n_iterations: 0,
            ..Default::default()
        };
        assert!(mice_impute(&t, &cfg, &BTreeSet::from(["y".to_string()])).is_err());
        assert!(mice_impute(&t, &MiceConfig::default(), &BTreeSet::from(["t".to_string()])).is_err());
    }
}
