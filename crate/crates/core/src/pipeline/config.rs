use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::{ComparisonConfig, ImputerSpec};
use crate::imputation::{KnnConfig, MiceConfig};
use crate::models::{BartConfig, GbrParams, ModelSpec};
use crate::selection::{SelectorId, SelectorSettings};
use crate::synth::Preset;
use crate::table::FilterPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// Generated cohort; the seed defaults to one derived from the master seed.
    Synth {
        preset: Preset,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Csv { path: PathBuf, schema: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputationConfig {
    pub knn: KnnConfig,
    pub mice: MiceConfig,
}

impl Default for ImputationConfig {
    fn default() -> Self {
        ImputationConfig {
            knn: KnnConfig::default(),
            mice: MiceConfig {
                max_predictors: Some(25),
                ..MiceConfig::default()
            },
        }
    }
}

impl ImputationConfig {
    pub fn as_imputer(&self) -> ImputerSpec {
        ImputerSpec::Mixed {
            knn: self.knn,
            mice: self.mice,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub selectors: Vec<SelectorId>,
    /// Size of the consensus feature set handed to the models.
    pub budget: usize,
    pub settings: SelectorSettings,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        use SelectorId::*;
        SelectionConfig {
            selectors: vec![Pearson, Spearman, MutualInformation, ReliefF, TreeGain, Lasso, Permutation, Shap],
            budget: 20,
            settings: SelectorSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub test_fraction: f64,
    pub histogram_bins: usize,
    pub pdp_points: usize,
    /// Extra (imputer, selector, model) rows for the comparison table.
    pub comparison: Vec<ComparisonConfig>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        let pipeline = ImputationConfig::default().as_imputer();
        let k = SelectionConfig::default().budget;
        EvaluationConfig {
            test_fraction: 0.2,
            histogram_bins: 30,
            pdp_points: 50,
            comparison: vec![
                ComparisonConfig {
                    imputer: pipeline.clone(),
                    selector: SelectorId::Shap,
                    k,
                    model: ModelSpec::Bart(paper_bart()),
                },
                ComparisonConfig {
                    imputer: pipeline.clone(),
                    selector: SelectorId::Shap,
                    k,
                    model: ModelSpec::Gbr(GbrParams::reference()),
                },
                ComparisonConfig {
                    imputer: pipeline,
                    selector: SelectorId::Pearson,
                    k,
                    model: ModelSpec::Linear { l1: 0.0, l2: 0.0 },
                },
                ComparisonConfig {
                    imputer: ImputerSpec::Mean,
                    selector: SelectorId::Pearson,
                    k,
                    model: ModelSpec::Linear { l1: 0.0, l2: 0.0 },
                },
            ],
        }
    }
}

/// 100 trees, 1,200 iterations, 200 burn-in; four chains thinned by 10.
pub fn paper_bart() -> BartConfig {
    BartConfig {
        n_trees: 100,
        n_iterations: 1200,
        burn_in: 200,
        thin: 10,
        n_chains: 4,
        ..BartConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputSpec,
    /// Column filter; `None` uses the preset's plan (paper-shaped) or keeps
    /// every column.
    #[serde(default)]
    pub filter: Option<FilterPlan>,
    #[serde(default)]
    pub imputation: ImputationConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default = "default_models")]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    /// Not part of the config hash.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_models() -> Vec<ModelSpec> {
    vec![ModelSpec::Bart(paper_bart()), ModelSpec::Gbr(GbrParams::reference())]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("bwpipe-out")
}

fn default_seed() -> u64 {
    2024
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: InputSpec::Synth {
                preset: Preset::PaperShaped,
                seed: None,
            },
            filter: None,
            imputation: ImputationConfig::default(),
            selection: SelectionConfig::default(),
            models: default_models(),
            evaluation: EvaluationConfig::default(),
            output_dir: default_output_dir(),
            seed: default_seed(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.selection.selectors.is_empty() {
            return bad("selection.selectors is empty".into());
        }
        if self.selection.budget == 0 {
            return bad("selection.budget must be at least 1".into());
        }
        if self.models.is_empty() {
            return bad("no models configured".into());
        }
        let mut ids: Vec<&str> = self.models.iter().map(ModelSpec::id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("each model kind may appear once".into());
        }
        for m in &self.models {
            if let ModelSpec::Bart(b) = m {
                b.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        let tf = self.evaluation.test_fraction;
        if !(tf > 0.0 && tf < 1.0) {
            return bad(format!("evaluation.test_fraction {tf} outside (0, 1)"));
        }
        if self.evaluation.histogram_bins == 0 || self.evaluation.pdp_points == 0 {
            return bad("histogram_bins and pdp_points must be positive".into());
        }
        if self.evaluation.comparison.iter().any(|c| c.k == 0) {
            return bad("comparison k must be at least 1".into());
        }
        if let Some(p) = &self.filter {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.imputation.knn.k == 0 {
            return bad("imputation.knn.k must be at least 1".into());
        }
        if self.imputation.mice.n_imputations == 0 {
            return bad("imputation.mice.n_imputations must be at least 1".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
