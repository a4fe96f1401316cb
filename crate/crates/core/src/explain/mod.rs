//! Attributions and response curves for fitted models.

pub mod pdp;
pub mod permutation;
pub mod shap;

pub use pdp::{make_grid, pdp, GridSpec, PdpCurve};
pub use permutation::{permutation_importance, PermutationMetric};
pub use shap::{bart_shap, model_shap, shap_importance, tree_shap, tree_shap_row, ShapMatrix};
