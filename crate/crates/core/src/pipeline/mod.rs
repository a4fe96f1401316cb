//! Staged, resumable runs. Every stage writes its artifacts plus a manifest
//! (config hash, seed, input and output digests) under its own directory;
//! downstream stages refuse artifacts from another config.

mod artifacts;
mod config;
mod stages;

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::error::Error;

pub use artifacts::{check_upstream, sha256_file, FileDigest, Manifest, ARTIFACT_FORMAT_VERSION, MANIFEST};
pub use config::{paper_bart, EvaluationConfig, ImputationConfig, InputSpec, PipelineConfig, SelectionConfig};
pub use stages::{
    effective_imputer, load_ground_truth, planned_stages, run_stage, ModelReport, SelectionFile, SplitFile, StageId,
};

pub const ERROR_REPORT: &str = "error.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(#[source] Error),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: StageId,
        #[source]
        source: Error,
    },
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    stage: Option<&'a str>,
    error: String,
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Stage { .. } => 3,
        }
    }

    pub fn stage(&self) -> Option<StageId> {
        match self {
            PipelineError::Validation(_) => None,
            PipelineError::Stage { stage, .. } => Some(*stage),
        }
    }

    /// Writes `error.json` naming the failing stage. Best effort.
    pub fn write_report(&self, output_dir: &Path) {
        let (stage, error) = match self {
            PipelineError::Validation(e) => (None, e.to_string()),
            PipelineError::Stage { stage, source } => (Some(stage.id()), source.to_string()),
        };
        let report = ErrorReport { stage, error };
        if std::fs::create_dir_all(output_dir).is_ok() {
            if let Ok(text) = serde_json::to_string_pretty(&report) {
                let _ = std::fs::write(output_dir.join(ERROR_REPORT), text + "\n");
            }
        }
    }
}

/// Runs `stages` in order, stopping at the first failure.
pub fn run_stages(config: &PipelineConfig, stages: &[StageId]) -> Result<(), PipelineError> {
    config.validate().map_err(PipelineError::Validation)?;
    let _ = std::fs::remove_file(config.output_dir.join(ERROR_REPORT));
    for &stage in stages {
        if let Err(source) = run_stage(config, stage) {
            let e = PipelineError::Stage { stage, source };
            e.write_report(&config.output_dir);
            return Err(e);
        }
    }
    Ok(())
}

/// Every stage, as `run_stage` would execute them one by one.
pub fn run_pipeline(config: &PipelineConfig) -> Result<(), PipelineError> {
    run_stages(config, &planned_stages(config))
}
