//! Filling missing cells: KNN for discrete columns, chained equations for
//! continuous ones, and cell-wise pooling of multiple imputations.

mod knn;
mod mice;
mod pool;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::table::{Role, Table};

pub use knn::{knn_impute, Distance, KnnConfig, TieBreak};
pub use mice::{mice_impute, ConditionalModel, MiceConfig, VisitOrder};
pub use pool::{pool_imputations, PoolStrategy};

/// Resolves target names to column indices, in table order.
fn resolve_targets(table: &Table, targets: &BTreeSet<String>) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(targets.len());
    for name in targets {
        let j = table.column_index(name)?;
        if table.columns()[j].meta.role == Role::Target {
            return Err(Error::InvalidParam(format!("`{name}` is the modelling target")));
        }
        idx.push(j);
    }
    idx.sort_unstable();
    Ok(idx)
}

/// Feature columns that may serve as predictors.
fn predictor_columns(table: &Table) -> Vec<usize> {
    table
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.meta.role == Role::Feature)
        .map(|(j, _)| j)
        .collect()
}

/// Every column of `table` holding missing cells whose kind matches.
pub fn columns_with_missing(table: &Table, discrete: bool) -> BTreeSet<String> {
    table
        .columns()
        .iter()
        .filter(|c| c.meta.role == Role::Feature && c.meta.kind.is_discrete() == discrete && c.n_missing() > 0)
        .map(|c| c.meta.name.clone())
        .collect()
}

/// Replaces every missing cell of the listed columns with the column mean
/// (continuous) or mode (discrete) of the observed cells.
pub fn mean_impute(table: &Table, targets: &BTreeSet<String>) -> Result<Table> {
    let idx = resolve_targets(table, targets)?;
    let mut columns = table.columns().to_vec();
    for j in idx {
        let c = &mut columns[j];
        let obs = c.observed_values();
        if obs.is_empty() {
            return Err(Error::EmptyObserved(c.meta.name.clone()));
        }
        let fill = if c.meta.kind.is_discrete() {
            mode(obs.iter().copied())
        } else {
            obs.iter().sum::<f64>() / obs.len() as f64
        };
        for i in 0..c.values.len() {
            if !c.observed[i] {
                c.values[i] = fill;
                c.observed[i] = true;
                c.imputed[i] = true;
            }
        }
    }
    Table::new(columns)
}

/// Most frequent code; ties go to the lowest code.
fn mode(codes: impl Iterator<Item = f64>) -> f64 {
    let mut counts: Vec<(f64, usize)> = Vec::new();
    for v in codes {
        match counts.iter_mut().find(|(c, _)| *c == v) {
            Some(e) => e.1 += 1,
            None => counts.push((v, 1)),
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.total_cmp(&a.0)))
        .map(|(c, _)| c)
        .unwrap_or(f64::NAN)
}

/// Convenience for the pipeline: KNN on discrete columns with missing cells,
/// then MICE on continuous columns with missing cells. Returns the
/// `n_imputations` completed tables.
pub fn impute_mixed(table: &Table, knn: &KnnConfig, mice: &MiceConfig) -> Result<Vec<Table>> {
    let discrete = columns_with_missing(table, true);
    let after_knn = if discrete.is_empty() {
        table.clone()
    } else {
        knn_impute(table, knn, &discrete)?
    };
    let continuous = columns_with_missing(table, false);
    mice_impute(&after_knn, mice, &continuous)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_ties_to_lowest_code() {
        assert_eq!(mode([2.0, 1.0, 2.0, 1.0, 3.0].into_iter()), 1.0);
        assert_eq!(mode([4.0, 4.0, 1.0].into_iter()), 4.0);
    }
}
