//! Native regressors: penalized linear, gradient boosting, BART.

pub mod bart;
pub mod gbr;
pub mod linalg;
pub mod linear;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use bart::{fit_bart, variable_inclusion, BartConfig, BartPosterior, BartPrediction};
pub use gbr::{fit_gbr, GbrParams};
pub use linear::{fit_linear, LinearModel};
pub use tree::{DecisionTree, Node, TreeEnsemble};

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub trait Regressor: Sync {
    fn n_features(&self) -> usize;
    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.n_cols(),
            });
        }
        Ok((0..x.n_rows()).map(|i| self.predict_row(x.row(i))).collect())
    }
}

impl Regressor for LinearModel {
    fn n_features(&self) -> usize {
        LinearModel::n_features(self)
    }
    fn predict_row(&self, row: &[f64]) -> f64 {
        LinearModel::predict_row(self, row)
    }
}

impl Regressor for TreeEnsemble {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn predict_row(&self, row: &[f64]) -> f64 {
        TreeEnsemble::predict_row(self, row)
    }
}

impl Regressor for BartPosterior {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn predict_row(&self, row: &[f64]) -> f64 {
        BartPosterior::predict_row(self, row)
    }
}

/// A model kind plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Linear {
        #[serde(default)]
        l1: f64,
        #[serde(default)]
        l2: f64,
    },
    Gbr(GbrParams),
    Bart(BartConfig),
}

impl ModelSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::Linear { .. } => "linear",
            ModelSpec::Gbr(_) => "gbr",
            ModelSpec::Bart(_) => "bart",
        }
    }

    pub fn with_seed(&self, seed: u64) -> ModelSpec {
        match self {
            ModelSpec::Linear { .. } => self.clone(),
            ModelSpec::Gbr(p) => ModelSpec::Gbr(GbrParams { seed, ..*p }),
            ModelSpec::Bart(c) => ModelSpec::Bart(BartConfig { seed, ..*c }),
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[f64]) -> Result<FittedModel> {
        Ok(match self {
            ModelSpec::Linear { l1, l2 } => FittedModel::Linear(fit_linear(x, y, *l1, *l2)?),
            ModelSpec::Gbr(p) => FittedModel::Gbr(fit_gbr(x, y, p)?),
            ModelSpec::Bart(c) => FittedModel::Bart(fit_bart(x, y, c)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearModel),
    Gbr(TreeEnsemble),
    Bart(BartPosterior),
}

impl FittedModel {
    pub fn id(&self) -> &'static str {
        match self {
            FittedModel::Linear(_) => "linear",
            FittedModel::Gbr(_) => "gbr",
            FittedModel::Bart(_) => "bart",
        }
    }

    pub fn as_regressor(&self) -> &dyn Regressor {
        match self {
            FittedModel::Linear(m) => m,
            FittedModel::Gbr(m) => m,
            FittedModel::Bart(m) => m,
        }
    }

    /// Per-feature importance: |standardized coefficient|, total split gain,
    /// or BART split-inclusion frequency.
    pub fn importance(&self) -> Vec<f64> {
        match self {
            FittedModel::Linear(m) => m.importance(),
            FittedModel::Gbr(m) => m.feature_gain(),
            FittedModel::Bart(m) => {
                let mut s = vec![0.0; m.n_features];
                for d in &m.draws {
                    for (a, c) in s.iter_mut().zip(d.split_counts()) {
                        *a += c as f64;
                    }
                }
                s
            }
        }
    }
}

impl Regressor for FittedModel {
    fn n_features(&self) -> usize {
        self.as_regressor().n_features()
    }
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.as_regressor().predict_row(row)
    }
}

/// On-disk model: format version, feature names in column order, the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub features: Vec<String>,
    pub target: String,
    pub fitted: FittedModel,
}

impl ModelFile {
    pub fn new(features: Vec<String>, target: String, fitted: FittedModel) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            features,
            target,
            fitted,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let m: ModelFile = serde_json::from_reader(std::io::BufReader::new(f))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidSpec(format!(
                "model format version {} (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }
}
