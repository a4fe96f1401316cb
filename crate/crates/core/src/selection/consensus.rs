use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ranking::SelectorRanking;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMethod {
    Borda,
}

/// Borda count: each ranking awards `n − rank` points; totals are ranked with
/// ties broken by column order. Input order does not matter.
pub fn aggregate_rankings(rankings: &[SelectorRanking], method: AggregateMethod) -> Result<SelectorRanking> {
    let AggregateMethod::Borda = method;
    let first = rankings
        .first()
        .ok_or_else(|| Error::InvalidParam("no rankings to aggregate".into()))?;
    let universe: BTreeMap<&str, usize> = first.entries.iter().map(|e| (e.feature.as_str(), e.column)).collect();
    let n = universe.len();
    let mut points: BTreeMap<&str, f64> = universe.keys().map(|k| (*k, 0.0)).collect();
    for r in rankings {
        let here: BTreeMap<&str, usize> = r.entries.iter().map(|e| (e.feature.as_str(), e.column)).collect();
        if here != universe {
            return Err(Error::UniverseMismatch(format!(
                "`{}` differs from `{}`",
                r.method_id, first.method_id
            )));
        }
        for e in &r.entries {
            *points.get_mut(e.feature.as_str()).expect("checked universe") += (n - e.rank) as f64;
        }
    }
    let mut by_column: Vec<(usize, &str)> = universe.iter().map(|(k, c)| (*c, *k)).collect();
    by_column.sort_unstable();
    let names: Vec<String> = by_column.iter().map(|(_, k)| k.to_string()).collect();
    let scores: Vec<f64> = by_column.iter().map(|(_, k)| points[k]).collect();
    Ok(SelectorRanking::from_scores("consensus_borda", &names, &scores))
}
