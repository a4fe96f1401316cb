use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mode, predictor_columns, resolve_targets};
use crate::error::{Error, Result};
use crate::table::{Kind, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    /// Range-normalized absolute difference for continuous predictors, 0/1
    /// mismatch for discrete ones, averaged over mutually observed cells.
    #[default]
    GowerMixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestRowIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
    pub distance: Distance,
    pub tie_break: TieBreak,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            k: 5,
            distance: Distance::GowerMixed,
            tie_break: TieBreak::LowestRowIndex,
        }
    }
}

struct Predictor<'a> {
    values: &'a [f64],
    observed: Vec<bool>,
    /// 0 for discrete predictors.
    range: f64,
    discrete: bool,
}

fn gower(preds: &[Predictor], a: usize, b: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0usize);
    for p in preds {
        if !(p.observed[a] && p.observed[b]) {
            continue;
        }
        den += 1;
        let (x, y) = (p.values[a], p.values[b]);
        num += if p.discrete {
            f64::from(u8::from(x != y))
        } else if p.range > 0.0 {
            (x - y).abs() / p.range
        } else {
            0.0
        };
    }
    // rows sharing no observed predictor are maximally distant
    if den == 0 {
        1.0
    } else {
        num / den as f64
    }
}

/// Fills missing cells of the target columns from the `k` nearest rows that
/// observe the column: the mode for discrete columns (ties to the lowest
/// code) and the mean for continuous ones. Distances use only originally
/// observed predictor cells of `Role::Feature` columns.
pub fn knn_impute(table: &Table, config: &KnnConfig, targets: &BTreeSet<String>) -> Result<Table> {
    let n = table.n_rows();
    if config.k == 0 || config.k + 1 > n {
        return Err(Error::InvalidParam(format!("k = {} outside [1, {}]", config.k, n.saturating_sub(1))));
    }
    let target_idx = resolve_targets(table, targets)?;
    let cols = table.columns();
    for &j in &target_idx {
        if cols[j].n_missing() == n {
            return Err(Error::EmptyObserved(cols[j].meta.name.clone()));
        }
    }
    let preds: Vec<Predictor> = predictor_columns(table)
        .into_iter()
        .map(|j| {
            let c = &cols[j];
            let observed: Vec<bool> = (0..n).map(|i| c.observed[i] && !c.imputed[i]).collect();
            let discrete = c.meta.kind.is_discrete();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in (0..n).filter(|&i| observed[i]) {
                lo = lo.min(c.values[i]);
                hi = hi.max(c.values[i]);
            }
            Predictor {
                values: &c.values,
                observed,
                range: if discrete || hi < lo { 0.0 } else { hi - lo },
                discrete,
            }
        })
        .collect();

    let rows: Vec<usize> = (0..n)
        .filter(|&i| target_idx.iter().any(|&j| !cols[j].observed[i]))
        .collect();
    // (row, column, value) fills, computed per row independently
    let fills: Vec<Vec<(usize, f64)>> = rows
        .par_iter()
        .map(|&r| {
            let dist: Vec<f64> = (0..n).map(|s| if s == r { f64::INFINITY } else { gower(&preds, r, s) }).collect();
            let mut out = Vec::new();
            for &j in &target_idx {
                let c = &cols[j];
                if c.observed[r] {
                    continue;
                }
                let mut cand: Vec<usize> = (0..n).filter(|&s| s != r && c.observed[s]).collect();
                let key = |s: &usize| (dist[*s], *s);
                let k = config.k.min(cand.len());
                if k < cand.len() {
                    cand.select_nth_unstable_by(k - 1, |a, b| key(a).0.total_cmp(&key(b).0).then(a.cmp(b)));
                    cand.truncate(k);
                }
                let neighbours = cand.iter().map(|&s| c.values[s]);
                let v = if c.meta.kind == Kind::Continuous {
                    neighbours.sum::<f64>() / k as f64
                } else {
                    mode(neighbours)
                };
                out.push((j, v));
            }
            out
        })
        .collect();

    let mut columns = cols.to_vec();
    for (&r, row_fills) in rows.iter().zip(fills) {
        for (j, v) in row_fills {
            let c = &mut columns[j];
            c.values[r] = v;
            c.observed[r] = true;
            c.imputed[r] = true;
        }
    }
    Table::new(columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Column, ColumnMeta, Role};

    fn table(x: Vec<f64>, y: Vec<f64>, y_obs: Vec<bool>) -> Table {
        let n = x.len();
        Table::new(vec![
            Column::complete(ColumnMeta::new("t", Kind::Continuous).with_role(Role::Target), vec![0.0; n]),
            Column::complete(ColumnMeta::new("x", Kind::Continuous), x),
            Column::new(ColumnMeta::new("y", Kind::Nominal), y, y_obs),
        ])
        .unwrap()
    }

    fn targets() -> BTreeSet<String> {
        BTreeSet::from(["y".to_string()])
    }

    #[test]
    fn unanimous_neighbours() {
        let t = table(vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 0.0], vec![true, false, true]);
        let out = knn_impute(&t, &KnnConfig { k: 2, ..Default::default() }, &targets()).unwrap();
        let y = out.column("y").unwrap();
        assert_eq!(y.values[1], 0.0);
        assert!(y.imputed[1] && y.observed[1]);
        assert!(!y.imputed[0]);
    }

    #[test]
    fn tie_goes_to_lower_code() {
        let t = table(vec![1.0, 2.0, 3.0], vec![1.0, 0.0, 0.0], vec![true, false, true]);
        let out = knn_impute(&t, &KnnConfig { k: 2, ..Default::default() }, &targets()).unwrap();
        assert_eq!(out.column("y").unwrap().values[1], 0.0);
        let t = table(vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 1.0], vec![true, false, true]);
        let out = knn_impute(&t, &KnnConfig { k: 2, ..Default::default() }, &targets()).unwrap();
        assert_eq!(out.column("y").unwrap().values[1], 0.0);
    }

    #[test]
    fn distance_ties_prefer_lower_rows() {
        // rows 0 and 2 are equidistant from row 1; k = 1 picks row 0
        let t = table(vec![1.0, 2.0, 3.0], vec![1.0, 0.0, 0.0], vec![true, false, true]);
        let out = knn_impute(&t, &KnnConfig { k: 1, ..Default::default() }, &targets()).unwrap();
        assert_eq!(out.column("y").unwrap().values[1], 1.0);
    }

    #[test]
    fn errors() {
        let t = table(vec![1.0, 2.0, 3.0], vec![0.0; 3], vec![false; 3]);
        assert!(knn_impute(&t, &KnnConfig::default(), &targets()).is_err());
        let t = table(vec![1.0, 2.0, 3.0], vec![0.0; 3], vec![true, false, true]);
        assert!(knn_impute(&t, &KnnConfig { k: 3, ..Default::default() }, &targets()).is_err());
        assert!(knn_impute(&t, &KnnConfig { k: 0, ..Default::default() }, &targets()).is_err());
        let bad = BTreeSet::from(["nope".to_string()]);
        assert!(knn_impute(&t, &KnnConfig { k: 1, ..Default::default() }, &bad).is_err());
    }
}
