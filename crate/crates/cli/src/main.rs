use std::path::PathBuf;
use std::process::ExitCode;

use bwpipe::pipeline::{run_stages, planned_stages, InputSpec, PipelineConfig, PipelineError, StageId};
use bwpipe::synth::Preset;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bwpipe", version, about = "Tabular regression pipeline: filter, impute, select, model, explain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (JSON). Defaults to the built-in config.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Run directory; overrides the config's output_dir.
    #[arg(long, env = "BWPIPE_OUTPUT_DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Read this CSV instead of generating data (needs --schema).
    #[arg(long, requires = "schema", conflicts_with = "preset")]
    input: Option<PathBuf>,
    /// Column schema (JSON) for --input.
    #[arg(long, requires = "input")]
    schema: Option<PathBuf>,
    /// Synthetic preset: paper-shaped, friedman1, selector-benchmark, mar-benchmark.
    #[arg(long)]
    preset: Option<Preset>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort with ground truth.
    Synth(Common),
    /// Apply the column filter plan.
    Filter(Common),
    /// Summary statistics and normality classes.
    Profile(Common),
    /// KNN + chained-equation imputation.
    Impute(Common),
    /// Run the feature selectors and the consensus ranking.
    Select(Common),
    /// Fit the configured models on the training rows.
    Train(Common),
    /// SHAP attributions and partial dependence.
    Explain(Common),
    /// Test metrics, residual diagnostics and the model comparison table.
    Report(Common),
    /// Every stage in order.
    Run(Common),
    /// Print the default config as JSON.
    ConfigTemplate,
}

fn build_config(c: &Common) -> Result<PipelineConfig, PipelineError> {
    let mut config = match &c.config {
        Some(p) => PipelineConfig::load(p).map_err(PipelineError::Validation)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &c.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = c.seed {
        config.seed = seed;
    }
    if let (Some(path), Some(schema)) = (&c.input, &c.schema) {
        config.input = InputSpec::Csv {
            path: path.clone(),
            schema: schema.clone(),
        };
    }
    if let Some(preset) = c.preset {
        config.input = InputSpec::Synth { preset, seed: None };
    }
    config.validate().map_err(PipelineError::Validation)?;
    Ok(config)
}

fn execute(common: &Common, stages: Option<&[StageId]>) -> Result<(), PipelineError> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PipelineError::Validation(bwpipe::Error::Config(e.to_string())))?;
    }
    let config = build_config(common)?;
    let stages = stages.map(<[StageId]>::to_vec).unwrap_or_else(|| planned_stages(&config));
    run_stages(&config, &stages)?;
    eprintln!("wrote {}", config.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, stage) = match &cli.command {
        Command::ConfigTemplate => {
            let text = serde_json::to_string_pretty(&PipelineConfig::default()).expect("config serializes");
            println!("{text}");
            return ExitCode::SUCCESS;
        }
        Command::Run(c) => (c, None),
        Command::Synth(c) => (c, Some(StageId::Synth)),
        Command::Filter(c) => (c, Some(StageId::Filter)),
        Command::Profile(c) => (c, Some(StageId::Profile)),
        Command::Impute(c) => (c, Some(StageId::Impute)),
        Command::Select(c) => (c, Some(StageId::Select)),
        Command::Train(c) => (c, Some(StageId::Train)),
        Command::Explain(c) => (c, Some(StageId::Explain)),
        Command::Report(c) => (c, Some(StageId::Report)),
    };
    let stages = stage.map(|s| [s]);
    match execute(common, stages.as_ref().map(|s| s.as_slice())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let (PipelineError::Validation(_), Some(out)) = (&e, &common.out) {
                e.write_report(out);
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
