//! Tabular regression pipeline engine.
//!
//! Staged column filtering, mixed-type imputation (KNN + chained equations),
//! filter/wrapper/embedded feature selection with Borda consensus, native
//! tree ensembles (gradient boosting and BART), exact TreeSHAP, partial
//! dependence, and residual diagnostics. A deterministic synthetic cohort
//! generator supplies ground truth for every statistical check.

pub mod error;
pub mod evaluation;
pub mod explain;
pub mod imputation;
pub mod matrix;
pub mod models;
pub mod pipeline;
pub mod profiling;
pub mod rng;
pub mod selection;
pub mod stats;
pub mod svg;
pub mod synth;
pub mod table;

pub use error::{Error, Result};
pub use matrix::{Design, Matrix};
pub use table::{Column, ColumnMeta, Kind, Lineage, Role, Stage, Table};
