use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics_any, MetricsReport};
use crate::error::{Error, Result};
use crate::imputation::{
    columns_with_missing, impute_mixed, knn_impute, mean_impute, mice_impute, pool_imputations, KnnConfig,
    MiceConfig, PoolStrategy,
};
use crate::matrix::Design;
use crate::models::{ModelSpec, Regressor};
use crate::rng;
use crate::selection::{run_selector, select_k_best, SelectorId, SelectorSettings};
use crate::table::{split_indices, Table};

/// How missing feature cells are filled before selection and fitting.
/// Multiple MICE imputations are pooled cell-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImputerSpec {
    /// Leave the table as is; every downstream step must cope with it.
    None,
    Mean,
    Knn(KnnConfig),
    Mice(MiceConfig),
    /// KNN for discrete columns, MICE for continuous ones.
    Mixed { knn: KnnConfig, mice: MiceConfig },
}

impl ImputerSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ImputerSpec::None => "none",
            ImputerSpec::Mean => "mean",
            ImputerSpec::Knn(_) => "knn",
            ImputerSpec::Mice(_) => "mice",
            ImputerSpec::Mixed { .. } => "mixed",
        }
    }

    pub fn apply(&self, table: &Table) -> Result<Table> {
        let all = || {
            let mut s = columns_with_missing(table, false);
            s.extend(columns_with_missing(table, true));
            s
        };
        match self {
            ImputerSpec::None => Ok(table.clone()),
            ImputerSpec::Mean => mean_impute(table, &all()),
            ImputerSpec::Knn(c) => knn_impute(table, c, &all()),
            ImputerSpec::Mice(c) => {
                // discrete holes get the mode first, MICE models continuous ones
                let discrete = columns_with_missing(table, true);
                let base = mean_impute(table, &discrete)?;
                pool_imputations(&mice_impute(&base, c, &columns_with_missing(table, false))?, PoolStrategy::Mean)
            }
            ImputerSpec::Mixed { knn, mice } => pool_imputations(&impute_mixed(table, knn, mice)?, PoolStrategy::Mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub imputer: ImputerSpec,
    pub selector: SelectorId,
    /// Number of top-ranked features handed to the model.
    pub k: usize,
    pub model: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// Position of the config in the input list.
    pub index: usize,
    pub imputer: String,
    pub selector: String,
    pub model: String,
    pub config: ComparisonConfig,
    pub model_seed: u64,
    pub selected: Vec<String>,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub seed: u64,
    pub test_fraction: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Sorted by test R² descending; failed rows last; ties keep input order.
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["rank", "imputer", "selector", "k", "model", "rmse", "mse", "r2", "n_test", "status"])?;
        for (r, row) in self.rows.iter().enumerate() {
            let (rmse, mse, r2, n) = match &row.metrics {
                Some(m) => (
                    m.rmse.to_string(),
                    m.mse.to_string(),
                    m.r2.map(|v| v.to_string()).unwrap_or_default(),
                    m.n.to_string(),
                ),
                None => Default::default(),
            };
            w.write_record([
                (r + 1).to_string(),
                row.imputer.clone(),
                row.selector.clone(),
                row.config.k.to_string(),
                row.model.clone(),
                rmse,
                mse,
                r2,
                n,
                row.error.clone().unwrap_or_else(|| "ok".into()),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<comparison csv>", e))
    }
}

fn run_one(
    imputed: &Result<Design>,
    train: &[usize],
    test: &[usize],
    config: &ComparisonConfig,
    settings: &SelectorSettings,
    seed: u64,
) -> Result<(Vec<String>, MetricsReport)> {
    let design = imputed.as_ref().map_err(|e| Error::Degenerate(format!("imputation failed: {e}")))?;
    let tr = design.select_rows(train);
    let te = design.select_rows(test);
    let ranking = run_selector(&tr, config.selector, settings, rng::derive_named(seed, "select"))?;
    let selected = select_k_best(&ranking, config.k.min(tr.n_features()))?;
    let tr = tr.select_named(&selected)?;
    let te = te.select_named(&selected)?;
    let model = config.model.with_seed(rng::derive_named(seed, "model")).fit(&tr.x, &tr.y)?;
    let pred = model.predict(&te.x)?;
    Ok((selected, metrics_any(&te.y, &pred, "test")))
}

/// Evaluates every (imputer, selector, model) config on one shared seeded
/// train/test split. Imputation runs once per distinct imputer on the whole
/// feature table (the target is never an imputation predictor); selection
/// and fitting see training rows only. A failing config becomes a failed row.
pub fn model_comparison(
    table: &Table,
    configs: &[ComparisonConfig],
    settings: &SelectorSettings,
    test_fraction: f64,
    seed: u64,
) -> Result<ComparisonTable> {
    model_comparison_with(table, configs, settings, test_fraction, seed, &[])
}

/// Like [`model_comparison`], reusing already imputed tables for the given
/// imputer specs.
pub fn model_comparison_with(
    table: &Table,
    configs: &[ComparisonConfig],
    settings: &SelectorSettings,
    test_fraction: f64,
    seed: u64,
    precomputed: &[(ImputerSpec, Table)],
) -> Result<ComparisonTable> {
    if configs.is_empty() {
        return Err(Error::InvalidParam("no comparison configs".into()));
    }
    let mut imputers: BTreeMap<String, &ImputerSpec> = BTreeMap::new();
    for c in configs {
        imputers.insert(serde_json::to_string(&c.imputer)?, &c.imputer);
    }
    let mut ready: BTreeMap<String, &Table> = BTreeMap::new();
    for (spec, t) in precomputed {
        ready.insert(serde_json::to_string(spec)?, t);
    }
    let cache: BTreeMap<String, Result<Design>> = imputers
        .into_iter()
        .map(|(key, spec)| {
            let d = match ready.get(&key) {
                Some(t) => Design::from_table(t),
                None => spec.apply(table).and_then(|t| Design::from_table(&t)),
            };
            (key, d)
        })
        .collect();
    let n = match cache.values().find_map(|d| d.as_ref().ok()) {
        Some(d) => d.n_rows(),
        None => Design::from_table(table)?.n_rows(),
    };
    let (train, test) = split_indices(n, test_fraction, rng::derive_named(seed, "split"))?;
    let model_seed = rng::derive_named(seed, "comparison");
    let mut rows: Vec<ComparisonRow> = configs
        .par_iter()
        .enumerate()
        .map(|(index, config)| {
            let key = serde_json::to_string(&config.imputer).expect("serialized above");
            let outcome = run_one(&cache[&key], &train, &test, config, settings, model_seed);
            let (selected, metrics, error) = match outcome {
                Ok((s, m)) => (s, Some(m), None),
                Err(e) => (Vec::new(), None, Some(e.to_string())),
            };
            ComparisonRow {
                index,
                imputer: config.imputer.id().to_string(),
                selector: config.selector.id().to_string(),
                model: config.model.id().to_string(),
                config: config.clone(),
                model_seed: rng::derive_named(model_seed, "model"),
                selected,
                metrics,
                error,
            }
        })
        .collect();
    let key = |r: &ComparisonRow| r.metrics.as_ref().and_then(|m| m.r2).unwrap_or(f64::NEG_INFINITY);
    rows.sort_by(|a, b| {
        b.error
            .is_none()
            .cmp(&a.error.is_none())
            .then(key(b).total_cmp(&key(a)))
            .then(a.index.cmp(&b.index))
    });
    Ok(ComparisonTable {
        seed,
        test_fraction,
        n_train: train.len(),
        n_test: test.len(),
        rows,
    })
}
