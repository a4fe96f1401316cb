use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::artifacts::{check_upstream, StageDir};
use super::config::{InputSpec, PipelineConfig};
use crate::error::{Error, Result};
use crate::evaluation::{
    compute_metrics, model_comparison_with, residual_report, Bandwidth, ImputerSpec, MetricsReport,
};
use crate::explain::{model_shap, pdp, shap_importance, GridSpec, PdpCurve};
use crate::imputation::{columns_with_missing, impute_mixed, pool_imputations, MiceConfig, PoolStrategy};
use crate::matrix::Design;
use crate::models::{FittedModel, ModelFile, ModelSpec, Regressor};
use crate::profiling::{histogram, profile_table, write_histogram_csv, NormalityTolerance};
use crate::rng;
use crate::selection::{run_selectors, SelectorRanking, SelectorSettings};
use crate::svg::{self, Mark, Series};
use crate::synth::{generate_preset, paper_filter_plan, GroundTruth, Preset};
use crate::table::{
    apply_filter_plan, load_csv, read_schema, save_csv, save_provenance_csv, split_indices, write_schema, FilterPlan,
    LoadOptions, Table,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageId {
    Synth,
    Filter,
    Profile,
    Impute,
    Select,
    Train,
    Explain,
    Report,
}

impl StageId {
    pub const ALL: [StageId; 8] = [
        StageId::Synth,
        StageId::Filter,
        StageId::Profile,
        StageId::Impute,
        StageId::Select,
        StageId::Train,
        StageId::Explain,
        StageId::Report,
    ];

    pub fn id(self) -> &'static str {
        match self {
            StageId::Synth => "synth",
            StageId::Filter => "filter",
            StageId::Profile => "profile",
            StageId::Impute => "impute",
            StageId::Select => "select",
            StageId::Train => "train",
            StageId::Explain => "explain",
            StageId::Report => "report",
        }
    }
}

impl std::fmt::Display for StageId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for StageId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StageId::ALL
            .into_iter()
            .find(|st| st.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Train/test row indices over the imputed design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub test_fraction: f64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFile {
    pub budget: usize,
    pub selected: Vec<String>,
    pub consensus: SelectorRanking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub train: MetricsReport,
    pub test: MetricsReport,
}

struct Ctx<'a> {
    config: &'a PipelineConfig,
    root: &'a Path,
    hash: String,
}

impl Ctx<'_> {
    fn seed(&self, stage: StageId) -> u64 {
        rng::derive_named(self.config.seed, stage.id())
    }

    fn upstream(&self, stage: StageId) -> Result<()> {
        check_upstream(self.root, stage.id(), &self.hash).map(|_| ())
    }

    fn file(&self, stage: StageId, name: &str) -> PathBuf {
        self.root.join(stage.id()).join(name)
    }

    /// Loads `<stage>/<csv>` against `<stage>/schema.json`, recording both as inputs.
    fn load_table(&self, dir: &mut StageDir, stage: StageId, csv: &str) -> Result<Table> {
        let data = self.file(stage, csv);
        let schema = self.file(stage, "schema.json");
        dir.input(&data)?;
        dir.input(&schema)?;
        load_csv(&data, &read_schema(&schema)?, &LoadOptions::default())
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, dir: &mut StageDir, stage: StageId, name: &str) -> Result<T> {
        let p = self.file(stage, name);
        dir.input(&p)?;
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn save_table(dir: &mut StageDir, table: &Table, csv: &str) -> Result<()> {
    save_csv(table, &dir.path(csv))?;
    dir.record(csv)?;
    write_schema(&dir.path("schema.json"), &table.schema())?;
    dir.record("schema.json")
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// MICE seeded from the impute stage seed; the rest as configured.
pub fn effective_imputer(config: &PipelineConfig) -> ImputerSpec {
    ImputerSpec::Mixed {
        knn: config.imputation.knn,
        mice: MiceConfig {
            seed: rng::derive_named(config.seed, StageId::Impute.id()),
            ..config.imputation.mice
        },
    }
}

fn filter_plan(config: &PipelineConfig) -> FilterPlan {
    match (&config.filter, &config.input) {
        (Some(p), _) => p.clone(),
        (None, InputSpec::Synth { preset: Preset::PaperShaped, .. }) => paper_filter_plan(),
        (None, _) => FilterPlan { steps: Vec::new() },
    }
}

fn run_synth(ctx: &Ctx, dir: &mut StageDir) -> Result<()> {
    let InputSpec::Synth { preset, seed } = &ctx.config.input else {
        return Err(Error::Config("the synth stage needs a synthetic input".into()));
    };
    let (table, truth) = generate_preset(*preset, seed.unwrap_or(ctx.seed(StageId::Synth)))?;
    save_table(dir, &table, "table.csv")?;
    dir.write_json("ground_truth.json", &truth)
}

fn run_filter(ctx: &Ctx, dir: &mut StageDir) -> Result<()> {
    let raw = match &ctx.config.input {
        InputSpec::Synth { .. } => {
            ctx.upstream(StageId::Synth)?;
            ctx.load_table(dir, StageId::Synth, "table.csv")?
        }
        InputSpec::Csv { path, schema } => {
            for p in [path, schema] {
                if !p.exists() {
                    return Err(Error::MissingArtifact(p.clone()));
                }
            }
            dir.input(path)?;
            dir.input(schema)?;
            load_csv(path, &read_schema(schema)?, &LoadOptions::default())?
        }
    };
    let (filtered, trace) = apply_filter_plan(&raw, &filter_plan(ctx.config))?;
    save_table(dir, &filtered, "filtered.csv")?;
    dir.write_json("trace.json", &trace)
}

fn run_profile(ctx: &Ctx, dir: &mut StageDir) -> Result<()> {
    ctx.upstream(StageId::Filter)?;
    let table = ctx.load_table(dir, StageId::Filter, "filtered.csv")?;
    let report = profile_table(&table, NormalityTolerance::default());
    dir.write_json("profile.json", &report)?;
    let target = &table.columns()[table.target_index()?];
    let h = histogram(&target.observed_values(), ctx.config.evaluation.histogram_bins)?;
    dir.write_bytes("target_histogram.csv", &csv_bytes(|b| write_histogram_csv(&h, b))?)?;
    let chart = svg::histogram(&format!("Distribution of {}", target.meta.name), &target.meta.name, &h.edges, &h.counts, None);
    dir.write_bytes("target_histogram.svg", chart.as_bytes())
}

#[derive(Serialize)]
struct ImputationSummary {
    imputer: ImputerSpec,
    discrete_columns: usize,
    continuous_columns: usize,
    imputed_cells: usize,
}

fn run_impute(ctx: &Ctx, dir: &mut StageDir) -> Result<()> {
    ctx.upstream(StageId::Filter)?;
    let table = ctx.load_table(dir, StageId::Filter, "filtered.csv")?;
    let spec = effective_imputer(ctx.config);
    let ImputerSpec::Mixed { knn, mice } = &spec else { unreachable!() };
    let imputed = pool_imputations(&impute_mixed(&table, knn, mice)?, PoolStrategy::Mean)?;
    save_table(dir, &imputed, "imputed.csv")?;
    save_provenance_csv(&imputed, &dir.path("provenance.csv"))?;
    dir.record("provenance.csv")?;
    let summary = ImputationSummary {
        discrete_columns: columns_with_missing(&table, true).len(),
        continuous_columns: columns_with_missing(&table, false).len(),
        imputed_cells: imputed.columns().iter().map(|c| c.imputed.iter().filter(|&&b| b).count()).sum(),
        imputer: spec,
    };
    dir.write_json("imputation.json", &summary)
}

fn imputed_design(ctx: &Ctx, dir: &mut StageDir) -> Result<Design> {
    ctx.upstream(StageId::Impute)?;
    let d = Design::from_table(&ctx.load_table(dir, StageId::Impute, "imputed.csv")?)?;
    d.require_complete()?;
    Ok(d)
}

fn run_select(ctx: &Ctx, dir: &mut StageDir) -> Result<()> {
    let design = imputed_design(ctx, dir)?;
    let ev = &ctx.config.evaluation;
    let split_seed = rng::derive_named(ctx.config.seed, "split");
    let (train, test) = split_indices(design.n_rows(), ev.test_fraction, split_seed)?;
    let sel = &ctx.config.selection;
    let settings = SelectorSettings {
        budget: sel.budget,
        ..sel.settings.clone()
    };
    let budget = sel.budget.min(design.n_features());
    let (rankings, consensus) = run_selectors(&design.select_rows(&train), &sel.selectors, &settings, ctx.seed(StageId::Select))?;
    dir.write_bytes("rankings.csv", &csv_bytes(|b| SelectorRanking::write_csv(&rankings, b))?)?;
    dir.write_json("rankings.json", &rankings)?;
    dir.write_json(
        "selection.json",
        &SelectionFile {
            budget,
            selected: consensus.top(budget),
            consensus,
        },
    )?;
    dir.write_json(
        "split.json",
        &SplitFile {
            seed: split_seed,
            test_fraction: ev.test_fraction,
            train,
            test,
        },
    )
}

struct Prepared {
    design: Design,
    split: SplitFile,
}

fn selected_design(ctx: &Ctx, dir: &mut StageDir) -> Result<Prepared> {
    ctx.upstream(StageId::Select)?;
    let selection: SelectionFile = ctx.read_json(dir, StageId::Select, "selection.json")?;
    let split: SplitFile = ctx.read_json(dir, StageId::Select, "split.json")?;
    let design = imputed_design(ctx, dir)?.select_named(&selection.selected)?;
    Ok(Prepared { design, split })
}

fn model_seed(ctx: &Ctx, spec: &ModelSpec) -> u64 {
    rng::derive_named(ctx.seed(StageId::Train), spec.id())
}

fn run_train(ctx: &Ctx, dir: &mut StageDir) -> Result<()> {
    let p = selected_design(ctx, dir)?;
    let tr = p.design.select_rows(&p.split.train);
    let fitted = ctx
        .config
        .models
        .par_iter()
        .map(|spec| spec.with_seed(model_seed(ctx, spec)).fit(&tr.x, &tr.y))
        .collect::<Result<Vec<_>>>()?;
    for f in fitted {
        let name = format!("model_{}.json", f.id());
        ModelFile::new(p.design.names.clone(), p.design.target.clone(), f).save(&dir.path(&name))?;
        dir.record(&name)?;
    }
    Ok(())
}

fn load_models(ctx: &Ctx, dir: &mut StageDir, design: &Design) -> Result<Vec<FittedModel>> {
    ctx.upstream(StageId::Train)?;
    ctx.config
        .models
        .iter()
        .map(|spec| {
            let path = ctx.file(StageId::Train, &format!("model_{}.json", spec.id()));
            dir.input(&path)?;
            let m = ModelFile::load(&path)?;
            if m.features != design.names {
                return Err(Error::SchemaMismatch(format!("{} was fit on other features", path.display())));
            }
            Ok(m.fitted)
        })
        .collect()
}

const PALETTE: [&str; 3] = ["#1f77b4", "#d62728", "#7f7f7f"];

fn file_safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

fn run_explain(ctx: &Ctx, dir: &mut StageDir) -> Result<()> {
    let p = selected_design(ctx, dir)?;
    let models = load_models(ctx, dir, &p.design)?;
    let grid = GridSpec::Points(ctx.config.evaluation.pdp_points);
    let names = &p.design.names;
    for m in &models {
        let id = m.id();
        let shap = model_shap(m, &p.design.x)?;
        dir.write_bytes(&format!("shap_{id}.csv"), &csv_bytes(|b| shap.write_csv(names, b))?)?;
        let imp = shap_importance(&shap, names)?;
        dir.write_json(&format!("shap_importance_{id}.json"), &imp)?;
        let labels: Vec<String> = imp.entries.iter().map(|e| e.feature.clone()).collect();
        let values: Vec<f64> = imp.entries.iter().map(|e| e.score).collect();
        let chart = svg::bars(&format!("Mean |SHAP| share (%), {id}"), &labels, &values);
        dir.write_bytes(&format!("shap_importance_{id}.svg"), chart.as_bytes())?;

        let curves = (0..names.len())
            .into_par_iter()
            .map(|j| pdp(m, &p.design.x, j, &names[j], &grid))
            .collect::<Result<Vec<PdpCurve>>>()?;
        dir.write_bytes(&format!("pdp_{id}.csv"), &csv_bytes(|b| PdpCurve::write_csv(&curves, b))?)?;
        dir.write_json(&format!("pdp_{id}.json"), &curves)?;
        for c in &curves {
            let mut series = vec![Series::new("mean", c.grid.clone(), c.mean_prediction.clone(), Mark::Line, PALETTE[0])];
            if let Some((lo, hi)) = &c.band {
                series.push(Series::new("5%", c.grid.clone(), lo.clone(), Mark::Dashed, PALETTE[2]));
                series.push(Series::new("95%", c.grid.clone(), hi.clone(), Mark::Dashed, PALETTE[2]));
            }
            let chart = svg::plot(&format!("Partial dependence, {id}"), &c.feature, &p.design.target, &series);
            dir.write_bytes(&format!("pdp_{id}_{}.svg", file_safe(&c.feature)), chart.as_bytes())?;
        }
    }
    Ok(())
}

fn run_report(ctx: &Ctx, dir: &mut StageDir) -> Result<()> {
    let p = selected_design(ctx, dir)?;
    let models = load_models(ctx, dir, &p.design)?;
    let tr = p.design.select_rows(&p.split.train);
    let te = p.design.select_rows(&p.split.test);
    let ev = &ctx.config.evaluation;
    let target = &p.design.target;
    let mut reports = Vec::new();
    for m in &models {
        let id = m.id();
        let mut train = compute_metrics(&tr.y, &m.predict(&tr.x)?)?;
        train.split_id = "train".into();
        let pred = m.predict(&te.x)?;
        let mut test = compute_metrics(&te.y, &pred)?;
        test.split_id = "test".into();
        reports.push(ModelReport {
            model: id.to_string(),
            train,
            test,
        });
        let r = residual_report(&te.y, &pred, ev.histogram_bins, Bandwidth::Silverman)?;
        dir.write_json(&format!("residuals_{id}.json"), &r)?;
        let overlay = r.kde.as_ref().map(|k| (k.grid.as_slice(), k.density.as_slice()));
        let chart = svg::histogram(&format!("Test residuals, {id}"), "residual", &r.histogram.edges, &r.histogram.counts, overlay);
        dir.write_bytes(&format!("residuals_{id}_hist.svg"), chart.as_bytes())?;
        let qx: Vec<f64> = r.qq.iter().map(|q| q.theoretical).collect();
        let qy: Vec<f64> = r.qq.iter().map(|q| q.sample).collect();
        let chart = svg::plot(
            &format!("Normal Q-Q, {id}"),
            "theoretical quantile",
            "standardized residual",
            &[
                Series::new("residuals", qx.clone(), qy, Mark::Dots, PALETTE[0]),
                Series::new("y = x", qx.clone(), qx, Mark::Dashed, PALETTE[1]),
            ],
        );
        dir.write_bytes(&format!("residuals_{id}_qq.svg"), chart.as_bytes())?;
        let chart = svg::plot(
            &format!("Residuals vs predicted, {id}"),
            "predicted",
            "residual",
            &[Series::new("test rows", r.predicted.clone(), r.residuals.clone(), Mark::Dots, PALETTE[0])],
        );
        dir.write_bytes(&format!("residuals_{id}_scatter.svg"), chart.as_bytes())?;
        let lo = te.y.iter().chain(&pred).copied().fold(f64::INFINITY, f64::min);
        let hi = te.y.iter().chain(&pred).copied().fold(f64::NEG_INFINITY, f64::max);
        let chart = svg::plot(
            &format!("Predicted vs observed, {id}"),
            &format!("observed {target}"),
            &format!("predicted {target}"),
            &[
                Series::new("test rows", te.y.clone(), pred, Mark::Dots, PALETTE[0]),
                Series::new("identity", vec![lo, hi], vec![lo, hi], Mark::Dashed, PALETTE[1]),
            ],
        );
        dir.write_bytes(&format!("predicted_vs_observed_{id}.svg"), chart.as_bytes())?;
    }
    dir.write_json("metrics.json", &reports)?;
    let metrics_csv = csv_bytes(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["model", "split", "n", "r2", "mse", "rmse"])?;
        for r in &reports {
            for m in [&r.train, &r.test] {
                w.write_record([
                    r.model.clone(),
                    m.split_id.clone(),
                    m.n.to_string(),
                    m.r2.map(|v| v.to_string()).unwrap_or_default(),
                    m.mse.to_string(),
                    m.rmse.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<metrics csv>", e))
    })?;
    dir.write_bytes("metrics.csv", &metrics_csv)?;

    if !ev.comparison.is_empty() {
        ctx.upstream(StageId::Filter)?;
        let filtered = ctx.load_table(dir, StageId::Filter, "filtered.csv")?;
        let imputed = ctx.load_table(dir, StageId::Impute, "imputed.csv")?;
        let configured = ctx.config.imputation.as_imputer();
        let effective = effective_imputer(ctx.config);
        let configs: Vec<_> = ev
            .comparison
            .iter()
            .map(|c| {
                let mut c = c.clone();
                if c.imputer == configured {
                    c.imputer = effective.clone();
                }
                c
            })
            .collect();
        let settings = SelectorSettings {
            budget: ctx.config.selection.budget,
            ..ctx.config.selection.settings.clone()
        };
        let table = model_comparison_with(
            &filtered,
            &configs,
            &settings,
            ev.test_fraction,
            ctx.config.seed,
            &[(effective, imputed)],
        )?;
        dir.write_json("comparison.json", &table)?;
        dir.write_bytes("comparison.csv", &csv_bytes(|b| table.write_csv(b))?)?;
    }
    Ok(())
}

/// Runs one stage against the artifacts already under the output directory.
pub fn run_stage(config: &PipelineConfig, stage: StageId) -> Result<()> {
    let root = config.output_dir.as_path();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let ctx = Ctx {
        config,
        root,
        hash: config.hash(),
    };
    let mut dir = StageDir::create(root, stage.id())?;
    match stage {
        StageId::Synth => run_synth(&ctx, &mut dir)?,
        StageId::Filter => run_filter(&ctx, &mut dir)?,
        StageId::Profile => run_profile(&ctx, &mut dir)?,
        StageId::Impute => run_impute(&ctx, &mut dir)?,
        StageId::Select => run_select(&ctx, &mut dir)?,
        StageId::Train => run_train(&ctx, &mut dir)?,
        StageId::Explain => run_explain(&ctx, &mut dir)?,
        StageId::Report => run_report(&ctx, &mut dir)?,
    }
    dir.finish(&ctx.hash, ctx.seed(stage))?;
    Ok(())
}

/// Stages a full run executes for this config, in order.
pub fn planned_stages(config: &PipelineConfig) -> Vec<StageId> {
    StageId::ALL
        .into_iter()
        .filter(|s| *s != StageId::Synth || matches!(config.input, InputSpec::Synth { .. }))
        .collect()
}

/// Reads the ground truth written by the synth stage.
pub fn load_ground_truth(output_dir: &Path) -> Result<GroundTruth> {
    let p = output_dir.join(StageId::Synth.id()).join("ground_truth.json");
    if !p.exists() {
        return Err(Error::MissingArtifact(p));
    }
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(serde_json::from_str(&text)?)
}
