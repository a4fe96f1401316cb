//! Metrics, cross-validation, residual diagnostics and model comparison.

mod comparison;
mod metrics;
mod residuals;

pub use comparison::{model_comparison, model_comparison_with, ComparisonConfig, ComparisonRow, ComparisonTable, ImputerSpec};
pub use metrics::{compute_metrics, kfold_assignment, kfold_cv, CvReport, MetricsReport};
pub use residuals::{kde, residual_report, silverman_bandwidth, Bandwidth, Kde, QqPoint, ResidualReport, QQ_CENTRAL_BAND};
