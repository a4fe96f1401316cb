//! Selector dispatch by id, shared by the comparison harness and the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::consensus::{aggregate_rankings, AggregateMethod};
use super::embedded::{embedded_scores, EmbeddedConfig, EmbeddedMethod};
use super::filter::{
    anova_f_scores, correlation_scores, mutual_information_scores, relief_f_scores, CorrelationMethod, ReliefConfig,
};
use super::ranking::SelectorRanking;
use super::wrapper::{boruta, forward_select, rfe, BorutaConfig};
use crate::error::{Error, Result};
use crate::explain::{model_shap, permutation_importance, shap_importance, PermutationMetric};
use crate::matrix::Design;
use crate::models::{fit_bart, fit_gbr, variable_inclusion, BartConfig, FittedModel, GbrParams, ModelSpec};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorId {
    Pearson,
    Spearman,
    Kendall,
    MutualInformation,
    AnovaF,
    ReliefF,
    Lasso,
    Ridge,
    ElasticNet,
    TreeGain,
    Permutation,
    Shap,
    BartInclusion,
    Boruta,
    Rfe,
    Forward,
}

impl SelectorId {
    pub const ALL: [SelectorId; 16] = [
        SelectorId::Pearson,
        SelectorId::Spearman,
        SelectorId::Kendall,
        SelectorId::MutualInformation,
        SelectorId::AnovaF,
        SelectorId::ReliefF,
        SelectorId::Lasso,
        SelectorId::Ridge,
        SelectorId::ElasticNet,
        SelectorId::TreeGain,
        SelectorId::Permutation,
        SelectorId::Shap,
        SelectorId::BartInclusion,
        SelectorId::Boruta,
        SelectorId::Rfe,
        SelectorId::Forward,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SelectorId::Pearson => "pearson",
            SelectorId::Spearman => "spearman",
            SelectorId::Kendall => "kendall",
            SelectorId::MutualInformation => "mutual_information",
            SelectorId::AnovaF => "anova_f",
            SelectorId::ReliefF => "relief_f",
            SelectorId::Lasso => "lasso",
            SelectorId::Ridge => "ridge",
            SelectorId::ElasticNet => "elastic_net",
            SelectorId::TreeGain => "tree_gain",
            SelectorId::Permutation => "permutation",
            SelectorId::Shap => "shap",
            SelectorId::BartInclusion => "bart_inclusion",
            SelectorId::Boruta => "boruta",
            SelectorId::Rfe => "rfe",
            SelectorId::Forward => "forward",
        }
    }
}

impl fmt::Display for SelectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SelectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectorId::ALL
            .into_iter()
            .find(|id| id.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown selector `{s}`")))
    }
}

/// Knobs for every selector; each selector reads only its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorSettings {
    pub mi_bins: usize,
    pub anova_bins: usize,
    pub relief: ReliefConfig,
    pub embedded: EmbeddedConfig,
    /// Model behind tree_gain, shap and permutation.
    pub gbr: GbrParams,
    pub permutation_repeats: usize,
    pub bart: BartConfig,
    pub boruta: BorutaConfig,
    /// Model refit by rfe and forward selection.
    pub wrapper_model: ModelSpec,
    pub rfe_step: usize,
    pub cv_folds: usize,
    /// Target size for rfe and forward selection.
    pub budget: usize,
}

impl Default for SelectorSettings {
    fn default() -> Self {
        SelectorSettings {
            mi_bins: 10,
            anova_bins: 10,
            relief: ReliefConfig::default(),
            embedded: EmbeddedConfig::default(),
            gbr: GbrParams {
                n_iterations: 300,
                max_depth: 4,
                learning_rate: 0.05,
                ..GbrParams::default()
            },
            permutation_repeats: 5,
            bart: BartConfig {
                n_trees: 50,
                n_iterations: 600,
                burn_in: 100,
                thin: 5,
                ..BartConfig::default()
            },
            boruta: BorutaConfig::default(),
            wrapper_model: ModelSpec::Linear { l1: 0.0, l2: 1e-6 },
            rfe_step: 10,
            cv_folds: 5,
            budget: 20,
        }
    }
}

/// Runs one selector on `design`. Seeds are derived from `seed` and the
/// selector id, so adding or removing selectors never shifts another's stream.
pub fn run_selector(design: &Design, id: SelectorId, settings: &SelectorSettings, seed: u64) -> Result<SelectorRanking> {
    let s = rng::derive_named(seed, id.id());
    let names = &design.names;
    let gbr = || -> Result<FittedModel> {
        design.require_complete()?;
        Ok(FittedModel::Gbr(fit_gbr(&design.x, &design.y, &GbrParams { seed: s, ..settings.gbr })?))
    };
    let embedded = |m: EmbeddedMethod| {
        embedded_scores(design, m, &EmbeddedConfig {
            seed: s,
            gbr: GbrParams { seed: s, ..settings.gbr },
            ..settings.embedded
        })
    };
    let budget = settings.budget.min(design.n_features().saturating_sub(1)).max(1);
    let mut r = match id {
        SelectorId::Pearson => correlation_scores(design, CorrelationMethod::Pearson),
        SelectorId::Spearman => correlation_scores(design, CorrelationMethod::Spearman),
        SelectorId::Kendall => correlation_scores(design, CorrelationMethod::Kendall),
        SelectorId::MutualInformation => mutual_information_scores(design, settings.mi_bins)?,
        SelectorId::AnovaF => anova_f_scores(design, settings.anova_bins)?,
        SelectorId::ReliefF => relief_f_scores(design, &ReliefConfig { seed: s, ..settings.relief })?,
        SelectorId::Lasso => embedded(EmbeddedMethod::Lasso)?,
        SelectorId::Ridge => embedded(EmbeddedMethod::Ridge)?,
        SelectorId::ElasticNet => embedded(EmbeddedMethod::ElasticNet)?,
        SelectorId::TreeGain => embedded(EmbeddedMethod::TreeGain)?,
        SelectorId::Permutation => {
            let m = gbr()?;
            permutation_importance(
                m.as_regressor(),
                &design.x,
                &design.y,
                names,
                PermutationMetric::R2,
                settings.permutation_repeats,
                s,
            )?
        }
        SelectorId::Shap => shap_importance(&model_shap(&gbr()?, &design.x)?, names)?,
        SelectorId::BartInclusion => {
            design.require_complete()?;
            let post = fit_bart(&design.x, &design.y, &BartConfig { seed: s, ..settings.bart })?;
            variable_inclusion(&post, names)?
        }
        SelectorId::Boruta => boruta(design, &BorutaConfig { seed: s, ..settings.boruta })?.ranking(),
        SelectorId::Rfe => rfe(design, &settings.wrapper_model.with_seed(s), budget, settings.rfe_step)?.ranking(design),
        SelectorId::Forward => {
            let steps = forward_select(design, &settings.wrapper_model.with_seed(s), budget, settings.cv_folds, s)?;
            let p = design.n_features();
            let scores: Vec<f64> = names
                .iter()
                .map(|n| match steps.iter().position(|st| &st.feature == n) {
                    Some(pos) => (p - pos) as f64,
                    None => 0.0,
                })
                .collect();
            SelectorRanking::from_scores("forward", names, &scores)
        }
    };
    r.method_id = id.id().to_string();
    Ok(r)
}

/// Every selector in `ids` (run in id order) plus their Borda consensus.
pub fn run_selectors(
    design: &Design,
    ids: &[SelectorId],
    settings: &SelectorSettings,
    seed: u64,
) -> Result<(Vec<SelectorRanking>, SelectorRanking)> {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let rankings = sorted
        .iter()
        .map(|&id| run_selector(design, id, settings, seed))
        .collect::<Result<Vec<_>>>()?;
    let consensus = aggregate_rankings(&rankings, AggregateMethod::Borda)?;
    Ok((rankings, consensus))
}
