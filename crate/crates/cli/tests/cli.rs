use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bwpipe::evaluation::{ComparisonConfig, ImputerSpec};
use bwpipe::imputation::MiceConfig;
use bwpipe::models::{BartConfig, FittedModel, GbrParams, ModelFile, ModelSpec};
use bwpipe::pipeline::{InputSpec, PipelineConfig, SelectionFile};
use bwpipe::selection::SelectorId;
use bwpipe::synth::Preset;
use serde_json::Value;

const STAGES: [&str; 8] = ["synth", "filter", "profile", "impute", "select", "train", "explain", "report"];

fn bwpipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bwpipe"))
        .args(args)
        .env_remove("BWPIPE_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn small_config() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.input = InputSpec::Synth { preset: Preset::Friedman1, seed: None };
    c.imputation.mice = MiceConfig { n_iterations: 3, n_imputations: 2, ..c.imputation.mice };
    c.selection.selectors = vec![SelectorId::Pearson, SelectorId::Spearman, SelectorId::TreeGain];
    c.selection.budget = 5;
    c.selection.settings.gbr = GbrParams { n_iterations: 40, ..c.selection.settings.gbr };
    c.models = vec![
        ModelSpec::Bart(BartConfig { n_trees: 20, n_iterations: 150, burn_in: 50, thin: 5, n_chains: 2, ..BartConfig::default() }),
        ModelSpec::Gbr(GbrParams { n_iterations: 60, ..GbrParams::default() }),
    ];
    c.evaluation.pdp_points = 10;
    c.evaluation.comparison = vec![ComparisonConfig {
        imputer: ImputerSpec::Mean,
        selector: SelectorId::Pearson,
        k: 5,
        model: ModelSpec::Linear { l1: 0.0, l2: 0.0 },
    }];
    c
}

fn write_config(dir: &Path, config: &PipelineConfig) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(config).unwrap()).unwrap();
    p
}

/// Relative path -> bytes, for every file under `root`.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn error_report(out: &Path) -> Value {
    serde_json::from_slice(&fs::read(out.join("error.json")).unwrap()).unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_equals_stage_by_stage_and_guards_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let cfg = cfg.to_str().unwrap();
    let whole = tmp.path().join("whole");
    let steps = tmp.path().join("steps");

    ok(&bwpipe(&["run", "-c", cfg, "--out", whole.to_str().unwrap()]));
    for s in STAGES {
        assert!(whole.join(s).join("manifest.json").exists(), "{s} manifest");
    }

    // report before train: the upstream artifacts are missing
    ok(&bwpipe(&["synth", "-c", cfg, "--out", steps.to_str().unwrap()]));
    let early = bwpipe(&["report", "-c", cfg, "--out", steps.to_str().unwrap()]);
    assert_eq!(early.status.code(), Some(3));
    let rep = error_report(&steps);
    assert_eq!(rep["stage"], "report");
    assert!(rep["error"].as_str().unwrap().contains("missing"), "{rep}");

    for s in &STAGES[1..] {
        ok(&bwpipe(&[s, "-c", cfg, "--out", steps.to_str().unwrap()]));
    }
    assert!(!steps.join("error.json").exists());
    let (a, b) = (snapshot(&whole), snapshot(&steps));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{} differs", k.display());
    }

    // another seed changes the config hash
    let stale = bwpipe(&["train", "-c", cfg, "--out", steps.to_str().unwrap(), "--seed", "99"]);
    assert_eq!(stale.status.code(), Some(3));
    assert_eq!(error_report(&steps)["stage"], "train");

    // so does editing an upstream file
    let csv = steps.join("impute").join("imputed.csv");
    let mut bytes = fs::read(&csv).unwrap();
    bytes.push(b'\n');
    fs::write(&csv, bytes).unwrap();
    let edited = bwpipe(&["select", "-c", cfg, "--out", steps.to_str().unwrap()]);
    assert_eq!(edited.status.code(), Some(3));
    assert!(error_report(&steps)["error"].as_str().unwrap().contains("sha256"));
}

#[test]
fn invalid_configs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::to_value(small_config()).unwrap();
    v["selection"]["selectors"] = serde_json::json!(["pearson", "astrology"]);
    let p = tmp.path().join("bad.json");
    fs::write(&p, v.to_string()).unwrap();
    let out = tmp.path().join("out");
    let o = bwpipe(&["run", "-c", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_report(&out)["stage"].is_null());
    assert!(!out.join("synth").exists());

    let mut dup = small_config();
    dup.models.push(ModelSpec::Gbr(GbrParams::default()));
    let p = write_config(tmp.path(), &dup);
    assert_eq!(bwpipe(&["run", "-c", p.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn config_template_parses_back() {
    let o = bwpipe(&["config-template"]);
    ok(&o);
    let parsed = PipelineConfig::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(parsed, PipelineConfig::default());
    parsed.validate().unwrap();
}

#[test]
fn default_budget_and_full_size_bart() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.input = InputSpec::Synth { preset: Preset::SelectorBenchmark, seed: None };
    c.selection.selectors = vec![SelectorId::Pearson, SelectorId::Spearman];
    c.selection.budget = 20;
    c.models = PipelineConfig::default().models.into_iter().filter(|m| matches!(m, ModelSpec::Bart(_))).collect();
    let bart = match &c.models[0] {
        ModelSpec::Bart(b) => b.clone(),
        _ => unreachable!(),
    };
    assert_eq!((bart.n_trees, bart.n_iterations, bart.burn_in, bart.thin, bart.n_chains), (100, 1200, 200, 10, 4));
    let cfg = write_config(tmp.path(), &c);
    let out = tmp.path().join("out");
    for s in ["synth", "filter", "profile", "impute", "select", "train"] {
        ok(&bwpipe(&[s, "-c", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    }
    let sel: SelectionFile = serde_json::from_slice(&fs::read(out.join("select").join("selection.json")).unwrap()).unwrap();
    assert_eq!(sel.selected.len(), 20);

    let model: ModelFile = serde_json::from_slice(&fs::read(out.join("train").join("model_bart.json")).unwrap()).unwrap();
    assert_eq!(model.features, sel.selected);
    let FittedModel::Bart(post) = model.fitted else { panic!("not a bart fit") };
    assert_eq!(post.draws.len(), 4 * (1200 - 200) / 10);
    assert!(post.draws.iter().all(|d| d.trees.len() == 100));
}
