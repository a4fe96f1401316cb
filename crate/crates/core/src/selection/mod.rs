//! Feature scoring, ranking and consensus.

pub mod consensus;
pub mod embedded;
pub mod filter;
pub mod ranking;
pub mod runner;
pub mod wrapper;

pub use consensus::{aggregate_rankings, AggregateMethod};
pub use embedded::{cv_penalty, embedded_scores, fit_penalized, lambda_grid, EmbeddedConfig, EmbeddedMethod, PenaltyPath};
pub use filter::{
    anova_f, anova_f_scores, correlation, correlation_scores, kendall_tau, mutual_information,
    mutual_information_scores, relief_f_scores, spearman, CorrelationMethod, ReliefConfig, F_CAP,
};
pub use runner::{run_selector, run_selectors, SelectorId, SelectorSettings};
pub use ranking::{select_k_best, Direction, RankEntry, SelectorRanking};
pub use wrapper::{
    boruta, forward_select, rfe, BorutaConfig, BorutaVerdict, Decision, FeatureVerdict, ForwardStep, RfeResult,
};
