//! Seeded synthetic cohorts with planted signal, decoys and missingness.
//!
//! A cohort is described column by column. Continuous columns are
//! `location + scale * u` with `u` standard normal (optionally loading on a
//! shared latent factor); ordinal and nominal columns quantize `u` into
//! equiprobable levels. The target is `mean + sum of effects + noise`, where
//! each effect is evaluated on the standardized stored value
//! `z = (value - location) / scale`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng;
use crate::table::{Column, ColumnMeta, FilterPlan, FilterStep, Kind, Lineage, Role, Stage, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Effect {
    Linear { slope: f64 },
    /// `jump` when z > cut.
    Threshold { cut: f64, jump: f64 },
    /// `amplitude * (z^2 - 1)`; zero mean under a standard normal.
    Nonmonotone { amplitude: f64 },
    /// `coef * z * z_with`.
    Interaction { with: String, coef: f64 },
}

impl Effect {
    fn eval_additive(&self, z: f64) -> f64 {
        match *self {
            Effect::Linear { slope } => slope * z,
            Effect::Threshold { cut, jump } => {
                if z > cut {
                    jump
                } else {
                    0.0
                }
            }
            Effect::Nonmonotone { amplitude } => amplitude * (z * z - 1.0),
            Effect::Interaction { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: Kind,
    /// Category count for ordinal and nominal columns.
    #[serde(default)]
    pub levels: usize,
    pub stage: Stage,
    pub lineage: Lineage,
    #[serde(default)]
    pub location: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub decimals: Option<u32>,
    /// Latent factor this column loads on.
    #[serde(default)]
    pub factor: Option<usize>,
    #[serde(default)]
    pub missing_rate: f64,
    #[serde(default)]
    pub effect: Option<Effect>,
}

fn one() -> f64 {
    1.0
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: Kind::Continuous,
            levels: 0,
            stage: Stage::Prenatal,
            lineage: Lineage::Maternal,
            location: 0.0,
            scale: 1.0,
            decimals: None,
            factor: None,
            missing_rate: 0.0,
            effect: None,
        }
    }

    pub fn discrete(name: impl Into<String>, kind: Kind, levels: usize) -> Self {
        ColumnSpec {
            kind,
            levels,
            ..ColumnSpec::continuous(name)
        }
    }

    pub fn tagged(mut self, stage: Stage, lineage: Lineage) -> Self {
        self.stage = stage;
        self.lineage = lineage;
        self
    }

    pub fn scaled(mut self, location: f64, scale: f64, decimals: Option<u32>) -> Self {
        self.location = location;
        self.scale = scale;
        self.decimals = decimals;
        self
    }

    pub fn with_effect(mut self, effect: Effect) -> Self {
        self.effect = Some(effect);
        self
    }

    pub fn with_missing(mut self, rate: f64) -> Self {
        self.missing_rate = rate;
        self
    }

    pub fn on_factor(mut self, factor: usize) -> Self {
        self.factor = Some(factor);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    pub mean: f64,
    #[serde(default)]
    pub clip_min: Option<f64>,
    #[serde(default)]
    pub decimals: Option<u32>,
    pub stage: Stage,
    pub lineage: Lineage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Mechanism {
    /// Independent Bernoulli masking; with `exact`, exactly
    /// `round(rate * n_rows)` cells per column.
    Mcar {
        #[serde(default)]
        exact: bool,
    },
    /// P(missing) = logistic(a + strength * z_driver), with `a` calibrated so
    /// the mean probability equals the column rate.
    Mar { driver: String, strength: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_rows: usize,
    pub seed: u64,
    pub target: TargetSpec,
    pub noise_sd: f64,
    #[serde(default)]
    pub n_factors: usize,
    #[serde(default)]
    pub loading: f64,
    pub mechanism: Mechanism,
    pub columns: Vec<ColumnSpec>,
}

/// One planted effect, with the column scaling needed to evaluate it on
/// stored values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTruth {
    pub feature: String,
    pub effect: Effect,
    pub location: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub target: String,
    pub intercept: f64,
    pub noise_sd: f64,
    /// Noiseless target.
    pub f: Vec<f64>,
    /// Every feature with a planted effect, including interaction partners.
    pub signals: Vec<String>,
    pub effects: Vec<SignalTruth>,
    /// Column name -> values before masking. Not serialized: a paper-shaped
    /// cohort holds millions of cells.
    #[serde(skip)]
    pub values: BTreeMap<String, Vec<f64>>,
}

impl GroundTruth {
    /// Planted effect of `feature` as a function of its stored value, when the
    /// feature enters the target additively (no interaction on either side).
    pub fn additive_effect(&self, feature: &str) -> Option<impl Fn(f64) -> f64 + '_> {
        let mut in_interaction = false;
        let mut own = None;
        for e in &self.effects {
            if let Effect::Interaction { with, .. } = &e.effect {
                if e.feature == feature || with == feature {
                    in_interaction = true;
                }
            } else if e.feature == feature {
                own = Some(e);
            }
        }
        match (own, in_interaction) {
            (Some(e), false) => Some(move |x: f64| e.effect.eval_additive((x - e.location) / e.scale)),
            _ => None,
        }
    }

    pub fn is_signal(&self, feature: &str) -> bool {
        self.signals.iter().any(|s| s == feature)
    }

    /// R² of the noiseless predictor against the generated target.
    pub fn oracle_r2(&self, y: &[f64]) -> f64 {
        let m = y.iter().sum::<f64>() / y.len() as f64;
        let ss_tot: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
        let ss_res: f64 = y.iter().zip(&self.f).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - ss_res / ss_tot
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn round_to(v: f64, decimals: Option<u32>) -> f64 {
    match decimals {
        Some(d) => {
            let p = 10f64.powi(d as i32);
            (v * p).round() / p
        }
        None => v,
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_rows == 0 {
            return bad("n_rows must be positive".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd {} must be finite and non-negative", self.noise_sd));
        }
        if !(0.0..1.0).contains(&self.loading.abs()) {
            return bad(format!("loading {} must lie in (-1, 1)", self.loading));
        }
        let mut names = BTreeSet::new();
        names.insert(self.target.name.as_str());
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return bad(format!("duplicate column `{}`", c.name));
            }
        }
        for c in &self.columns {
            if !(0.0..1.0).contains(&c.missing_rate) {
                return bad(format!("missing rate {} of `{}` outside [0, 1)", c.missing_rate, c.name));
            }
            if !(c.scale > 0.0 && c.scale.is_finite()) {
                return bad(format!("scale of `{}` must be positive", c.name));
            }
            if c.kind.is_discrete() && c.levels < 2 {
                return bad(format!("discrete column `{}` needs at least 2 levels", c.name));
            }
            if let Some(f) = c.factor {
                if f >= self.n_factors {
                    return bad(format!("`{}` loads on factor {f} of {}", c.name, self.n_factors));
                }
            }
            if let Some(Effect::Interaction { with, .. }) = &c.effect {
                if !names.contains(with.as_str()) || *with == self.target.name {
                    return bad(format!("`{}` interacts with unknown column `{with}`", c.name));
                }
            }
        }
        if let Mechanism::Mar { driver, strength } = &self.mechanism {
            let Some(d) = self.columns.iter().find(|c| &c.name == driver) else {
                return bad(format!("unknown MAR driver `{driver}`"));
            };
            if d.kind != Kind::Continuous || d.missing_rate != 0.0 {
                return bad(format!("MAR driver `{driver}` must be continuous and fully observed"));
            }
            if !strength.is_finite() {
                return bad("MAR strength must be finite".into());
            }
        }
        Ok(())
    }
}

fn latent_column(spec: &CohortSpec, j: usize, factors: &[Vec<f64>]) -> Vec<f64> {
    let c = &spec.columns[j];
    let mut r = rng::rng(rng::derive(rng::derive_named(spec.seed, "columns"), j as u64));
    let l = spec.loading;
    let idio = (1.0 - l * l).sqrt();
    (0..spec.n_rows)
        .map(|i| {
            let e: f64 = StandardNormal.sample(&mut r);
            match c.factor {
                Some(f) => l * factors[f][i] + idio * e,
                None => e,
            }
        })
        .collect()
}

fn stored_values(c: &ColumnSpec, u: &[f64]) -> Vec<f64> {
    match c.kind {
        Kind::Continuous => u.iter().map(|v| round_to(c.location + c.scale * v, c.decimals)).collect(),
        _ => u
            .iter()
            .map(|v| ((normal_cdf(*v) * c.levels as f64).floor()).min(c.levels as f64 - 1.0))
            .collect(),
    }
}

fn mask(spec: &CohortSpec, j: usize, driver: Option<&[f64]>) -> Vec<bool> {
    let c = &spec.columns[j];
    let n = spec.n_rows;
    let mut observed = vec![true; n];
    if c.missing_rate == 0.0 {
        return observed;
    }
    let mut r = rng::rng(rng::derive(rng::derive_named(spec.seed, "mask"), j as u64));
    match (&spec.mechanism, driver) {
        (Mechanism::Mcar { exact: true }, _) => {
            let k = (c.missing_rate * n as f64).round() as usize;
            for i in sample(&mut r, n, k.min(n)) {
                observed[i] = false;
            }
        }
        (Mechanism::Mar { strength, .. }, Some(z)) => {
            // calibrate the intercept so the expected missing fraction matches
            let mean_p = |a: f64| z.iter().map(|v| logistic(a + strength * v)).sum::<f64>() / n as f64;
            let (mut lo, mut hi) = (-50.0, 50.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mean_p(mid) < c.missing_rate {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let a = 0.5 * (lo + hi);
            for (o, v) in observed.iter_mut().zip(z) {
                *o = r.random::<f64>() >= logistic(a + strength * v);
            }
        }
        _ => {
            for o in observed.iter_mut() {
                *o = r.random::<f64>() >= c.missing_rate;
            }
        }
    }
    observed
}

/// Generates the cohort. Bit-reproducible for a fixed spec.
pub fn generate(spec: &CohortSpec) -> Result<(Table, GroundTruth)> {
    spec.validate()?;
    let n = spec.n_rows;
    let mut fr = rng::rng(rng::derive_named(spec.seed, "factors"));
    let factors: Vec<Vec<f64>> = (0..spec.n_factors)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut fr)).collect())
        .collect();

    let values: Vec<Vec<f64>> = (0..spec.columns.len())
        .into_par_iter()
        .map(|j| stored_values(&spec.columns[j], &latent_column(spec, j, &factors)))
        .collect();
    let index: BTreeMap<&str, usize> = spec
        .columns
        .iter()
        .enumerate()
        .map(|(j, c)| (c.name.as_str(), j))
        .collect();
    let z_of = |j: usize, i: usize| {
        let c = &spec.columns[j];
        (values[j][i] - c.location) / c.scale
    };

    let mut f = vec![spec.target.mean; n];
    let mut effects = Vec::new();
    let mut signals = BTreeSet::new();
    for (j, c) in spec.columns.iter().enumerate() {
        let Some(e) = &c.effect else { continue };
        signals.insert(c.name.clone());
        match e {
            Effect::Interaction { with, coef } => {
                let k = index[with.as_str()];
                signals.insert(with.clone());
                for (i, fi) in f.iter_mut().enumerate() {
                    *fi += coef * z_of(j, i) * z_of(k, i);
                }
            }
            _ => {
                for (i, fi) in f.iter_mut().enumerate() {
                    *fi += e.eval_additive(z_of(j, i));
                }
            }
        }
        effects.push(SignalTruth {
            feature: c.name.clone(),
            effect: e.clone(),
            location: c.location,
            scale: c.scale,
        });
    }
    let mut nr = rng::rng(rng::derive_named(spec.seed, "noise"));
    let y: Vec<f64> = f
        .iter()
        .map(|fi| {
            let e: f64 = StandardNormal.sample(&mut nr);
            let v = fi + spec.noise_sd * e;
            let v = spec.target.clip_min.map_or(v, |m| v.max(m));
            round_to(v, spec.target.decimals)
        })
        .collect();

    let driver: Option<Vec<f64>> = match &spec.mechanism {
        Mechanism::Mar { driver, .. } => {
            let j = index[driver.as_str()];
            Some((0..n).map(|i| z_of(j, i)).collect())
        }
        Mechanism::Mcar { .. } => None,
    };
    let masks: Vec<Vec<bool>> = (0..spec.columns.len())
        .into_par_iter()
        .map(|j| mask(spec, j, driver.as_deref()))
        .collect();

    let mut columns = Vec::with_capacity(spec.columns.len() + 1);
    let t = &spec.target;
    columns.push(Column::complete(
        ColumnMeta::new(&t.name, Kind::Continuous)
            .with_role(Role::Target)
            .with_stage(t.stage)
            .with_lineage(t.lineage),
        y,
    ));
    let mut truth_values = BTreeMap::new();
    for ((c, v), m) in spec.columns.iter().zip(values).zip(masks) {
        let meta = ColumnMeta::new(&c.name, c.kind).with_stage(c.stage).with_lineage(c.lineage);
        let mut col = Column::new(meta, v.clone(), m);
        if c.kind == Kind::Nominal {
            col = col.with_labels((0..c.levels).map(|k| format!("{}{k}", level_prefix(k))).collect());
        }
        truth_values.insert(c.name.clone(), v);
        columns.push(col);
    }
    let table = Table::new(columns)?;
    Ok((
        table,
        GroundTruth {
            target: t.name.clone(),
            intercept: t.mean,
            noise_sd: spec.noise_sd,
            f,
            signals: signals.into_iter().collect(),
            effects,
            values: truth_values,
        },
    ))
}

fn level_prefix(k: usize) -> char {
    (b'a' + (k % 26) as u8) as char
}

/// y = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 + noise, with
/// x1..x10 uniform on [0, 1]; x6..x10 are decoys.
pub fn friedman1(n_rows: usize, noise_sd: f64, seed: u64) -> Result<(Table, GroundTruth)> {
    if n_rows == 0 {
        return Err(Error::InvalidSpec("n_rows must be positive".into()));
    }
    let mut r = rng::rng(rng::derive_named(seed, "friedman1"));
    let mut x = vec![vec![0.0; n_rows]; 10];
    let mut f = vec![0.0; n_rows];
    let mut y = vec![0.0; n_rows];
    for i in 0..n_rows {
        for col in x.iter_mut() {
            col[i] = r.random::<f64>();
        }
        f[i] = friedman1_f(&[x[0][i], x[1][i], x[2][i], x[3][i], x[4][i]]);
        let e: f64 = StandardNormal.sample(&mut r);
        y[i] = f[i] + noise_sd * e;
    }
    let mut columns = vec![Column::complete(ColumnMeta::new("y", Kind::Continuous).with_role(Role::Target), y)];
    let mut values = BTreeMap::new();
    for (j, v) in x.into_iter().enumerate() {
        let name = format!("x{}", j + 1);
        values.insert(name.clone(), v.clone());
        columns.push(Column::complete(ColumnMeta::new(name, Kind::Continuous), v));
    }
    Ok((
        Table::new(columns)?,
        GroundTruth {
            target: "y".into(),
            intercept: 0.0,
            noise_sd,
            f,
            signals: (1..=5).map(|j| format!("x{j}")).collect(),
            effects: Vec::new(),
            values,
        },
    ))
}

pub fn friedman1_f(x: &[f64]) -> f64 {
    10.0 * (std::f64::consts::PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

fn birth_weight_target() -> TargetSpec {
    TargetSpec {
        name: "birth_weight".into(),
        mean: 2800.0,
        clip_min: Some(800.0),
        decimals: Some(0),
        stage: Stage::Delivery,
        lineage: Lineage::Offspring,
    }
}

// ---------------------------------------------------------------------------
// presets

/// Signals planted in the paper-shaped cohort, strongest first.
pub const PAPER_SIGNALS: [&str; 9] = [
    "f0_m_plac_wt",
    "f0_m_GA_Del",
    "f0_m_fundal_ht_v2",
    "f0_m_wt_v1",
    "f0_m_hb_v2",
    "f0_f_ht",
    "f0_m_parity",
    "f0_m_age",
    "f0_m_bmi_v1",
];

pub const PAPER_N_ROWS: usize = 800;
pub const PAPER_N_COLUMNS: usize = 5979;
/// Missing cells among the 852 columns that survive the default plan.
pub const PAPER_FINAL_MISSING: usize = 29_786;
/// Column counts after each step of [`paper_filter_plan`].
pub const PAPER_TRACE: [usize; 5] = [5979, 1122, 886, 867, 852];

pub fn paper_filter_plan() -> FilterPlan {
    FilterPlan {
        steps: vec![
            FilterStep::DropStage {
                stages: BTreeSet::from([Stage::Postnatal]),
                lineages: Some(BTreeSet::from([Lineage::Offspring, Lineage::Paternal, Lineage::Other])),
            },
            FilterStep::DropStage {
                stages: BTreeSet::from([Stage::Postnatal]),
                lineages: None,
            },
            FilterStep::MinObserved { threshold: 0.6 },
            FilterStep::KeepKinds {
                kinds: BTreeSet::from([Kind::Continuous, Kind::Ordinal]),
            },
        ],
    }
}

fn prefix(lineage: Lineage) -> &'static str {
    match lineage {
        Lineage::Maternal => "f0_m_",
        Lineage::Paternal => "f0_f_",
        Lineage::Offspring => "f1_",
        Lineage::Other => "hh_",
    }
}

/// Splits `total` into integer counts proportional to `weights`, each at most
/// `cap`, largest remainders first. Zero-weight entries stay at zero.
fn apportion(total: usize, weights: &[f64], cap: usize) -> Vec<usize> {
    assert!(weights.iter().filter(|w| **w > 0.0).count() * cap >= total, "cap too small for total");
    let mut counts = vec![0usize; weights.len()];
    let mut remaining = total;
    let mut active: Vec<usize> = (0..weights.len()).filter(|&j| weights[j] > 0.0).collect();
    while remaining > 0 {
        let wsum: f64 = active.iter().map(|&j| weights[j]).sum();
        let mut fracs = Vec::with_capacity(active.len());
        let mut given = 0;
        for &j in &active {
            let share = remaining as f64 * weights[j] / wsum;
            let add = (share.floor() as usize).min(cap - counts[j]);
            counts[j] += add;
            given += add;
            fracs.push((share - share.floor(), j));
        }
        remaining -= given;
        fracs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &fracs {
            if remaining == 0 {
                break;
            }
            if counts[j] < cap {
                counts[j] += 1;
                remaining -= 1;
            }
        }
        active.retain(|&j| counts[j] < cap);
        if active.is_empty() {
            break;
        }
    }
    counts
}

/// 800 rows x 5,979 columns tagged so that [`paper_filter_plan`] yields the
/// trajectory in [`PAPER_TRACE`], with 29,786 missing cells (4.37%) left in
/// the final 852 columns and about 47.4% missing overall.
pub fn paper_shaped(seed: u64) -> CohortSpec {
    let n = PAPER_N_ROWS;
    let mut r = rng::rng(rng::derive_named(seed, "paper-layout"));
    let rate = |count: usize| count as f64 / n as f64;

    use Lineage::*;
    use Stage::*;
    let signals = vec![
        ColumnSpec::continuous("f0_m_plac_wt")
            .tagged(Delivery, Maternal)
            .scaled(450.0, 90.0, Some(1))
            .with_effect(Effect::Linear { slope: 240.0 }),
        ColumnSpec::continuous("f0_m_GA_Del")
            .tagged(Delivery, Maternal)
            .scaled(38.6, 1.6, Some(2))
            .with_effect(Effect::Linear { slope: 190.0 }),
        ColumnSpec::continuous("f0_m_fundal_ht_v2")
            .tagged(Prenatal, Maternal)
            .scaled(30.0, 2.5, Some(2))
            .with_effect(Effect::Linear { slope: 120.0 }),
        ColumnSpec::continuous("f0_m_wt_v1")
            .tagged(Prenatal, Maternal)
            .scaled(42.0, 6.0, Some(2))
            .with_effect(Effect::Linear { slope: 75.0 }),
        ColumnSpec::continuous("f0_m_hb_v2")
            .tagged(Prenatal, Maternal)
            .scaled(11.0, 1.2, Some(2))
            .with_effect(Effect::Nonmonotone { amplitude: 45.0 }),
        ColumnSpec::continuous("f0_f_ht")
            .tagged(Prenatal, Paternal)
            .scaled(162.0, 6.0, Some(1))
            .with_effect(Effect::Linear { slope: 50.0 }),
        ColumnSpec::discrete("f0_m_parity", Kind::Ordinal, 4)
            .tagged(Prenatal, Maternal)
            .scaled(1.5, 1.0, None)
            .with_effect(Effect::Linear { slope: 30.0 }),
        ColumnSpec::continuous("f0_m_age")
            .tagged(Prenatal, Maternal)
            .scaled(21.0, 3.5, Some(1))
            .with_effect(Effect::Interaction { with: "f0_m_bmi_v1".into(), coef: 40.0 }),
        ColumnSpec::continuous("f0_m_bmi_v1")
            .tagged(Prenatal, Maternal)
            .scaled(18.5, 2.0, Some(2)),
    ];

    // 851 surviving features: 304 continuous (9 signals incl.) + 547 ordinal
    let mut survivors = signals;
    let n_cont_signal = survivors.iter().filter(|c| c.kind == Kind::Continuous).count();
    let n_ord_signal = survivors.len() - n_cont_signal;
    let survivor_tags = [
        (Prenatal, Maternal),
        (Prenatal, Maternal),
        (Prenatal, Paternal),
        (Prenatal, Offspring),
        (Delivery, Maternal),
        (Delivery, Offspring),
        (Prenatal, Other),
    ];
    let mut k = 0usize;
    let next_tag = |r: &mut rng::Rng| survivor_tags[r.random_range(0..survivor_tags.len())];
    for _ in 0..(304 - n_cont_signal) {
        let (s, l) = next_tag(&mut r);
        k += 1;
        let loc = r.random_range(1.0..200.0_f64).round();
        let sc = (loc * r.random_range(0.05..0.3_f64)).max(0.5);
        survivors.push(
            ColumnSpec::continuous(format!("{}{}_c{k:04}", prefix(l), stage_tag(s)))
                .tagged(s, l)
                .scaled(loc, sc, Some(3)),
        );
    }
    for _ in 0..(547 - n_ord_signal) {
        let (s, l) = next_tag(&mut r);
        k += 1;
        let levels = r.random_range(2..=5);
        survivors.push(
            ColumnSpec::discrete(format!("{}{}_o{k:04}", prefix(l), stage_tag(s)), Kind::Ordinal, levels)
                .tagged(s, l),
        );
    }
    // final missingness: signals lightly, others skewed, all within 40%
    let signal_missing = 6usize;
    let n_sig = PAPER_SIGNALS.len();
    let rest = PAPER_FINAL_MISSING - n_sig * signal_missing;
    let weights: Vec<f64> = (n_sig..survivors.len())
        .map(|_| {
            let u: f64 = r.random();
            if u < 0.25 {
                0.0
            } else {
                u * u
            }
        })
        .collect();
    let counts = apportion(rest, &weights, 300);
    for (j, c) in survivors.iter_mut().enumerate() {
        let m = if j < n_sig { signal_missing } else { counts[j - n_sig] };
        c.missing_rate = rate(m);
    }

    let mut dropped = Vec::new();
    // 19 sparse pre-/delivery columns removed by min_observed(0.6)
    for _ in 0..19 {
        let (s, l) = next_tag(&mut r);
        k += 1;
        let m = r.random_range(330..=700);
        let kind = if r.random::<bool>() { Kind::Continuous } else { Kind::Ordinal };
        let c = match kind {
            Kind::Continuous => ColumnSpec::continuous(format!("{}{}_c{k:04}", prefix(l), stage_tag(s)))
                .scaled(50.0, 10.0, Some(3)),
            _ => ColumnSpec::discrete(format!("{}{}_o{k:04}", prefix(l), stage_tag(s)), Kind::Ordinal, 3),
        };
        dropped.push(c.tagged(s, l).with_missing(rate(m)));
    }
    // 15 string-valued columns removed by keep_kinds
    for _ in 0..15 {
        let (s, l) = next_tag(&mut r);
        k += 1;
        let m = r.random_range(0..=200);
        dropped.push(
            ColumnSpec::discrete(format!("{}{}_n{k:04}", prefix(l), stage_tag(s)), Kind::Nominal, r.random_range(2..=6))
                .tagged(s, l)
                .with_missing(rate(m)),
        );
    }
    // postnatal: 236 maternal, the rest other lineages
    let n_postnatal = PAPER_N_COLUMNS - 1 - survivors.len() - dropped.len();
    let mut postnatal = Vec::with_capacity(n_postnatal);
    for p in 0..n_postnatal {
        let l = if p < 236 {
            Maternal
        } else {
            [Offspring, Offspring, Paternal, Other][r.random_range(0..4)]
        };
        k += 1;
        let u: f64 = r.random();
        let c = if u < 0.35 {
            ColumnSpec::continuous(format!("{}pn_c{k:04}", prefix(l))).scaled(10.0, 3.0, Some(3))
        } else if u < 0.9 {
            ColumnSpec::discrete(format!("{}pn_o{k:04}", prefix(l)), Kind::Ordinal, r.random_range(2..=5))
        } else {
            ColumnSpec::discrete(format!("{}pn_n{k:04}", prefix(l)), Kind::Nominal, r.random_range(2..=4))
        };
        postnatal.push(c.tagged(Postnatal, l));
    }
    let total_cells = PAPER_N_COLUMNS * n;
    let overall = (0.4737 * total_cells as f64).round() as usize;
    let dropped_missing: usize = dropped.iter().map(|c| (c.missing_rate * n as f64).round() as usize).sum();
    let pn_weights: Vec<f64> = (0..postnatal.len()).map(|_| r.random_range(0.3..0.8)).collect();
    let pn_counts = apportion(overall - PAPER_FINAL_MISSING - dropped_missing, &pn_weights, n - 40);
    for (c, m) in postnatal.iter_mut().zip(pn_counts) {
        c.missing_rate = rate(m);
    }

    let mut columns: Vec<ColumnSpec> = survivors.into_iter().chain(dropped).chain(postnatal).collect();
    columns.shuffle(&mut r);
    CohortSpec {
        n_rows: n,
        seed,
        target: birth_weight_target(),
        noise_sd: 150.0,
        n_factors: 0,
        loading: 0.0,
        mechanism: Mechanism::Mcar { exact: true },
        columns,
    }
}

fn stage_tag(s: Stage) -> &'static str {
    match s {
        Stage::Prenatal => "pre",
        Stage::Delivery => "del",
        Stage::Postnatal => "pn",
    }
}

/// Ten planted signals among `n_decoys` independent decoys: five linear, two
/// threshold, two nonmonotone and one pure interaction (`sig10` x `sig01`).
/// About a fifth of the decoys are ordinal.
pub fn selector_benchmark(n_rows: usize, n_decoys: usize, seed: u64) -> CohortSpec {
    let mut columns = Vec::with_capacity(10 + n_decoys);
    let effects = [
        Effect::Linear { slope: 100.0 },
        Effect::Linear { slope: -100.0 },
        Effect::Linear { slope: 90.0 },
        Effect::Linear { slope: -90.0 },
        Effect::Linear { slope: 80.0 },
        Effect::Threshold { cut: 0.0, jump: 200.0 },
        Effect::Threshold { cut: 0.5, jump: -200.0 },
        Effect::Nonmonotone { amplitude: 70.0 },
        Effect::Nonmonotone { amplitude: -70.0 },
        Effect::Interaction { with: "sig01".into(), coef: 100.0 },
    ];
    for (j, e) in effects.into_iter().enumerate() {
        columns.push(ColumnSpec::continuous(format!("sig{:02}", j + 1)).scaled(0.0, 1.0, Some(4)).with_effect(e));
    }
    let mut r = rng::rng(rng::derive_named(seed, "decoy-kinds"));
    for d in 0..n_decoys {
        let name = format!("dec{:03}", d + 1);
        columns.push(if r.random::<f64>() < 0.2 {
            ColumnSpec::discrete(name, Kind::Ordinal, r.random_range(2..=5))
        } else {
            ColumnSpec::continuous(name).scaled(0.0, 1.0, Some(4))
        });
    }
    CohortSpec {
        n_rows,
        seed,
        target: birth_weight_target(),
        noise_sd: 150.0,
        n_factors: 0,
        loading: 0.0,
        mechanism: Mechanism::Mcar { exact: false },
        columns,
    }
}

/// Two latent factors with ten continuous columns each (loading 0.85), plus a
/// fully observed MAR driver on factor 0. The first five columns of each
/// factor are masked at `rate` under MAR.
pub fn mar_benchmark(n_rows: usize, rate: f64, seed: u64) -> CohortSpec {
    let mut columns = vec![ColumnSpec::continuous("driver").scaled(50.0, 10.0, Some(3)).on_factor(0)];
    for f in 0..2 {
        for j in 0..10 {
            let mut c = ColumnSpec::continuous(format!("f{f}_x{j:02}"))
                .scaled(10.0 * (j + 1) as f64, 2.0 + j as f64, Some(3))
                .on_factor(f);
            if j < 5 {
                c = c.with_missing(rate);
            }
            if j == 0 {
                c = c.with_effect(Effect::Linear { slope: 150.0 });
            }
            columns.push(c);
        }
    }
    CohortSpec {
        n_rows,
        seed,
        target: birth_weight_target(),
        noise_sd: 200.0,
        n_factors: 2,
        loading: 0.85,
        mechanism: Mechanism::Mar {
            driver: "driver".into(),
            strength: 1.0,
        },
        columns,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    PaperShaped,
    Friedman1,
    SelectorBenchmark,
    MarBenchmark,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-shaped" => Ok(Preset::PaperShaped),
            "friedman1" => Ok(Preset::Friedman1),
            "selector-benchmark" => Ok(Preset::SelectorBenchmark),
            "mar-benchmark" => Ok(Preset::MarBenchmark),
            _ => Err(Error::InvalidSpec(format!("unknown preset `{s}`"))),
        }
    }
}

/// Generates a preset with its conventional size.
pub fn generate_preset(preset: Preset, seed: u64) -> Result<(Table, GroundTruth)> {
    match preset {
        Preset::PaperShaped => generate(&paper_shaped(seed)),
        Preset::Friedman1 => friedman1(1000, 1.0, seed),
        Preset::SelectorBenchmark => generate(&selector_benchmark(1000, 200, seed)),
        Preset::MarBenchmark => generate(&mar_benchmark(2000, 0.3, seed)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_is_exact_and_capped() {
        let c = apportion(1000, &[1.0, 0.0, 3.0, 2.0], 400);
        assert_eq!(c.iter().sum::<usize>(), 1000);
        assert!(c.iter().all(|&v| v <= 400));
        assert_eq!(c[1], 0);
    }

    #[test]
    fn no_missingness_means_complete() {
        let spec = selector_benchmark(50, 5, 3);
        let (t, truth) = generate(&spec).unwrap();
        assert_eq!(t.dataset_missing_fraction(), 0.0);
        assert_eq!(t.n_columns(), 16);
        assert_eq!(truth.signals.len(), 10);
    }

    #[test]
    fn reproducible() {
        let spec = mar_benchmark(100, 0.3, 9);
        let (a, ta) = generate(&spec).unwrap();
        let (b, tb) = generate(&spec).unwrap();
        assert_eq!(ta, tb);
        for (x, y) in a.columns().iter().zip(b.columns()) {
            assert_eq!(x.observed, y.observed);
            assert!(x.values.iter().zip(&y.values).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn zero_noise_friedman_is_formula() {
        let (t, truth) = friedman1(200, 0.0, 1).unwrap();
        let y = &t.column("y").unwrap().values;
        assert_eq!(y, &truth.f);
        let xs: Vec<&Vec<f64>> = (1..=5).map(|j| &t.column(&format!("x{j}")).unwrap().values).collect();
        for i in 0..200 {
            let row: Vec<f64> = xs.iter().map(|c| c[i]).collect();
            assert_eq!(y[i], friedman1_f(&row));
        }
    }

    #[test]
    fn invalid_specs() {
        let mut s = selector_benchmark(10, 2, 0);
        s.columns[11].missing_rate = 1.0;
        assert!(generate(&s).is_err());
        let mut s = selector_benchmark(10, 2, 0);
        s.columns[0].name = "sig02".into();
        assert!(generate(&s).is_err());
        let mut s = mar_benchmark(10, 0.3, 0);
        s.mechanism = Mechanism::Mar { driver: "f0_x00".into(), strength: 1.0 };
        assert!(generate(&s).is_err());
    }

    #[test]
    fn additive_effect_lookup() {
        let (_, truth) = generate(&selector_benchmark(20, 2, 0)).unwrap();
        let g = truth.additive_effect("sig02").unwrap();
        assert_eq!(g(1.0), -100.0);
        assert!(truth.additive_effect("sig01").is_none());
        assert!(truth.additive_effect("sig10").is_none());
        assert!(truth.additive_effect("dec001").is_none());
    }
}
