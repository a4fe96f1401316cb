//! Columnar table with an explicit per-cell observation mask, CSV ingestion,
//! staged column filtering and seeded train/test splitting.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Continuous,
    Ordinal,
    Nominal,
}

impl Kind {
    pub fn is_discrete(self) -> bool {
        !matches!(self, Kind::Continuous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Prenatal,
    Delivery,
    Postnatal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lineage {
    Maternal,
    Paternal,
    Offspring,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Feature,
    Target,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: Kind,
    pub stage: Stage,
    pub lineage: Lineage,
    pub role: Role,
    #[serde(default)]
    pub missing_fraction: f64,
}

impl ColumnMeta {
    pub fn new(name: impl Into<String>, kind: Kind) -> Self {
        ColumnMeta {
            name: name.into(),
            kind,
            stage: Stage::Prenatal,
            lineage: Lineage::Maternal,
            role: Role::Feature,
            missing_fraction: 0.0,
        }
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn with_stage(mut self, stage: Stage) -> Self {
        self.stage = stage;
        self
    }

    pub fn with_lineage(mut self, lineage: Lineage) -> Self {
        self.lineage = lineage;
        self
    }
}

/// One column: values, observation mask, imputation provenance and, for
/// nominal columns, the label dictionary (code `i` is `labels[i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub meta: ColumnMeta,
    pub values: Vec<f64>,
    pub observed: Vec<bool>,
    pub imputed: Vec<bool>,
    pub labels: Option<Vec<String>>,
}

impl Column {
    /// Builds a column; unobserved cells are stored as `NaN`.
    pub fn new(meta: ColumnMeta, values: Vec<f64>, observed: Vec<bool>) -> Self {
        let values = values
            .into_iter()
            .zip(&observed)
            .map(|(v, &o)| if o { v } else { f64::NAN })
            .collect();
        let n = observed.len();
        Column {
            meta,
            values,
            observed,
            imputed: vec![false; n],
            labels: None,
        }
    }

    pub fn complete(meta: ColumnMeta, values: Vec<f64>) -> Self {
        let n = values.len();
        Column::new(meta, values, vec![true; n])
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn n_missing(&self) -> usize {
        self.observed.iter().filter(|o| !**o).count()
    }

    pub fn observed_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.observed)
            .filter(|(_, o)| **o)
            .map(|(v, _)| *v)
            .collect()
    }

    /// Values with unobserved cells as `NaN`.
    pub fn masked_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.observed)
            .map(|(v, &o)| if o { *v } else { f64::NAN })
            .collect()
    }

    fn take_rows(&self, rows: &[usize]) -> Column {
        Column {
            meta: self.meta.clone(),
            values: rows.iter().map(|&i| self.values[i]).collect(),
            observed: rows.iter().map(|&i| self.observed[i]).collect(),
            imputed: rows.iter().map(|&i| self.imputed[i]).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Immutable columnar dataset. Construction validates every invariant and
/// refreshes `missing_fraction` on each column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    n_rows: usize,
    columns: Vec<Column>,
}

impl Table {
    pub fn new(mut columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |c| c.values.len());
        let mut seen = HashSet::new();
        for c in &mut columns {
            if !seen.insert(c.meta.name.clone()) {
                return Err(Error::DuplicateColumn(c.meta.name.clone()));
            }
            if c.values.len() != n_rows || c.observed.len() != n_rows || c.imputed.len() != n_rows
            {
                return Err(Error::ShapeMismatch(format!(
                    "column `{}` length differs from {n_rows} rows",
                    c.meta.name
                )));
            }
            for i in 0..n_rows {
                if !c.observed[i] {
                    continue;
                }
                let v = c.values[i];
                let ok = match c.meta.kind {
                    Kind::Continuous => v.is_finite(),
                    Kind::Ordinal | Kind::Nominal => v.is_finite() && v >= 0.0 && v.fract() == 0.0,
                };
                if !ok {
                    return Err(Error::NonFinite(format!(
                        "column `{}` row {i} holds invalid value {v}",
                        c.meta.name
                    )));
                }
            }
            c.meta.missing_fraction = if n_rows == 0 {
                0.0
            } else {
                c.n_missing() as f64 / n_rows as f64
            };
        }
        Ok(Table { n_rows, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn into_columns(self) -> Vec<Column> {
        self.columns
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.meta.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.meta.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.meta.name.clone()).collect()
    }

    pub fn schema(&self) -> Vec<ColumnMeta> {
        self.columns.iter().map(|c| c.meta.clone()).collect()
    }

    /// Index of the single `Role::Target` column.
    pub fn target_index(&self) -> Result<usize> {
        let t: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.meta.role == Role::Target)
            .map(|(i, _)| i)
            .collect();
        if t.len() != 1 {
            return Err(Error::TargetCount(t.len()));
        }
        Ok(t[0])
    }

    pub fn n_features(&self) -> usize {
        self.columns
            .iter()
            .filter(|c| c.meta.role == Role::Feature)
            .count()
    }

    pub fn take_rows(&self, rows: &[usize]) -> Table {
        let columns: Vec<Column> = self.columns.iter().map(|c| c.take_rows(rows)).collect();
        Table::new(columns).expect("row subset of a valid table is valid")
    }

    /// Keeps the named columns in their current order.
    pub fn retain_columns(&self, keep: &dyn Fn(&Column) -> bool) -> Table {
        Table {
            n_rows: self.n_rows,
            columns: self.columns.iter().filter(|c| keep(c)).cloned().collect(),
        }
    }

    pub fn replace_column(&self, idx: usize, column: Column) -> Result<Table> {
        let mut columns = self.columns.clone();
        columns[idx] = column;
        Table::new(columns)
    }

    /// Unobserved cells / total cells.
    pub fn dataset_missing_fraction(&self) -> f64 {
        let total = self.n_rows * self.columns.len();
        if total == 0 {
            return 0.0;
        }
        let missing: usize = self.columns.iter().map(Column::n_missing).sum();
        missing as f64 / total as f64
    }
}

/// Refreshes every column's `missing_fraction` and returns the dataset-level
/// missing percentage (0..=100).
pub fn recompute_missingness(table: &Table) -> (Table, f64) {
    let t = Table::new(table.columns.clone()).expect("valid table stays valid");
    let pct = 100.0 * t.dataset_missing_fraction();
    (t, pct)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadOptions {
    pub missing_tokens: BTreeSet<String>,
    pub max_cardinality: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            missing_tokens: ["", "NA"].iter().map(|s| s.to_string()).collect(),
            max_cardinality: 1000,
        }
    }
}

pub fn read_schema(path: &Path) -> Result<Vec<ColumnMeta>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

pub fn write_schema(path: &Path, schema: &[ColumnMeta]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, schema)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_csv(path: &Path, schema: &[ColumnMeta], opts: &LoadOptions) -> Result<Table> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(f), schema, opts)
}

/// Parses CSV text against `schema`. A cell is unobserved when it matches a
/// missing token, or fails to parse as a number (continuous) or as a
/// non-negative integer (ordinal). Nominal labels are coded by first appearance.
pub fn read_csv<R: std::io::Read>(
    reader: R,
    schema: &[ColumnMeta],
    opts: &LoadOptions,
) -> Result<Table> {
    if opts.missing_tokens.is_empty() {
        return Err(Error::InvalidParam("missing_tokens must be non-empty".into()));
    }
    let mut names = HashSet::new();
    for m in schema {
        if !names.insert(m.name.as_str()) {
            return Err(Error::DuplicateColumn(m.name.clone()));
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut position: HashMap<&str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if position.insert(h, i).is_some() {
            return Err(Error::DuplicateColumn(h.to_string()));
        }
    }
    for m in schema {
        if !position.contains_key(m.name.as_str()) {
            return Err(Error::SchemaMismatch(format!(
                "schema column `{}` not in header",
                m.name
            )));
        }
    }
    if let Some(extra) = header.iter().find(|h| !names.contains(h)) {
        return Err(Error::SchemaMismatch(format!(
            "header column `{extra}` not in schema"
        )));
    }

    let p = schema.len();
    let mut raw: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut obs: Vec<Vec<bool>> = vec![Vec::new(); p];
    let mut dicts: Vec<HashMap<String, usize>> = vec![HashMap::new(); p];
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); p];
    let cols: Vec<usize> = schema.iter().map(|m| position[m.name.as_str()]).collect();

    for record in rdr.records() {
        let record = record?;
        for (j, m) in schema.iter().enumerate() {
            let cell = record.get(cols[j]).unwrap_or("");
            let (v, o) = if opts.missing_tokens.contains(cell) {
                (f64::NAN, false)
            } else {
                match m.kind {
                    Kind::Continuous => match cell.trim().parse::<f64>() {
                        Ok(v) if v.is_finite() => (v, true),
                        _ => (f64::NAN, false),
                    },
                    Kind::Ordinal => match cell.trim().parse::<f64>() {
                        Ok(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 => (v, true),
                        _ => (f64::NAN, false),
                    },
                    Kind::Nominal => {
                        let next = dicts[j].len();
                        let code = *dicts[j].entry(cell.to_string()).or_insert_with(|| {
                            labels[j].push(cell.to_string());
                            next
                        });
                        if dicts[j].len() > opts.max_cardinality {
                            return Err(Error::Cardinality {
                                column: m.name.clone(),
                                max: opts.max_cardinality,
                            });
                        }
                        (code as f64, true)
                    }
                }
            };
            raw[j].push(v);
            obs[j].push(o);
        }
    }

    let columns = schema
        .iter()
        .zip(raw.into_iter().zip(obs))
        .zip(labels)
        .map(|((m, (v, o)), l)| {
            let c = Column::new(m.clone(), v, o);
            if m.kind == Kind::Nominal {
                c.with_labels(l)
            } else {
                c
            }
        })
        .collect();
    Table::new(columns)
}

fn format_cell(c: &Column, i: usize, missing_token: &str) -> String {
    if !c.observed[i] {
        return missing_token.to_string();
    }
    let v = c.values[i];
    match c.meta.kind {
        Kind::Continuous => format!("{v}"),
        Kind::Ordinal => format!("{}", v as i64),
        Kind::Nominal => match &c.labels {
            Some(l) => l[v as usize].clone(),
            None => format!("{}", v as i64),
        },
    }
}

/// Writes the table as CSV. Continuous values use the shortest round-trip
/// decimal form so `load_csv` restores them bit-exactly.
pub fn write_csv<W: Write>(table: &Table, writer: W, missing_token: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(table.columns.iter().map(|c| c.meta.name.as_str()))?;
    for i in 0..table.n_rows {
        w.write_record(table.columns.iter().map(|c| format_cell(c, i, missing_token)))?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(table: &Table, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(table, BufWriter::new(f), "")
}

/// Companion to an imputed CSV: `observed`, `imputed` or `missing` per cell.
pub fn save_provenance_csv(table: &Table, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    w.write_record(table.columns.iter().map(|c| c.meta.name.as_str()))?;
    for i in 0..table.n_rows {
        w.write_record(table.columns.iter().map(|c| {
            if c.imputed[i] {
                "imputed"
            } else if c.observed[i] {
                "observed"
            } else {
                "missing"
            }
        }))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Restores the `imputed` flags written by [`save_provenance_csv`].
pub fn apply_provenance_csv(table: &Table, path: &Path) -> Result<Table> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(f));
    let header = rdr.headers()?.clone();
    if header.len() != table.n_columns()
        || header.iter().zip(&table.columns).any(|(h, c)| h != c.meta.name)
    {
        return Err(Error::SchemaMismatch("provenance header differs from table".into()));
    }
    let mut columns = table.columns.clone();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if i >= table.n_rows {
            return Err(Error::ShapeMismatch("provenance has extra rows".into()));
        }
        for (j, cell) in rec.iter().enumerate() {
            columns[j].imputed[i] = cell == "imputed";
        }
    }
    Table::new(columns)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStep {
    /// Drops columns whose stage is listed; when `lineages` is set only
    /// columns of those lineages are affected.
    DropStage {
        stages: BTreeSet<Stage>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lineages: Option<BTreeSet<Lineage>>,
    },
    /// Keeps columns with observed fraction at least `threshold`.
    MinObserved { threshold: f64 },
    KeepKinds { kinds: BTreeSet<Kind> },
    DropLineage { lineages: BTreeSet<Lineage> },
}

impl fmt::Display for FilterStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterStep::DropStage { stages, lineages } => {
                write!(f, "drop_stage{stages:?}")?;
                if let Some(l) = lineages {
                    write!(f, " lineage{l:?}")?;
                }
                Ok(())
            }
            FilterStep::MinObserved { threshold } => write!(f, "min_observed({threshold})"),
            FilterStep::KeepKinds { kinds } => write!(f, "keep_kinds{kinds:?}"),
            FilterStep::DropLineage { lineages } => write!(f, "drop_lineage{lineages:?}"),
        }
    }
}

impl FilterStep {
    fn keeps(&self, c: &Column, n_rows: usize) -> bool {
        match self {
            FilterStep::DropStage { stages, lineages } => {
                let hit = stages.contains(&c.meta.stage)
                    && lineages.as_ref().is_none_or(|l| l.contains(&c.meta.lineage));
                !hit
            }
            FilterStep::MinObserved { threshold } => {
                let observed = (n_rows - c.n_missing()) as f64;
                // at least `threshold`, with slack for decimal thresholds like 0.6
                observed >= threshold * n_rows as f64 - 1e-9
            }
            FilterStep::KeepKinds { kinds } => kinds.contains(&c.meta.kind),
            FilterStep::DropLineage { lineages } => !lineages.contains(&c.meta.lineage),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterPlan {
    pub steps: Vec<FilterStep>,
}

impl FilterPlan {
    pub fn validate(&self) -> Result<()> {
        for s in &self.steps {
            if let FilterStep::MinObserved { threshold } = s {
                if !(0.0..=1.0).contains(threshold) {
                    return Err(Error::InvalidPlan(format!(
                        "threshold {threshold} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterTrace {
    /// Column count before any step, then after each step.
    pub counts: Vec<usize>,
    pub steps: Vec<String>,
    /// Dataset missing percentage alongside `counts`.
    pub missing_pct: Vec<f64>,
}

pub fn apply_filter_plan(table: &Table, plan: &FilterPlan) -> Result<(Table, FilterTrace)> {
    plan.validate()?;
    let mut current = table.clone();
    let mut trace = FilterTrace {
        counts: vec![current.n_columns()],
        steps: Vec::new(),
        missing_pct: vec![100.0 * current.dataset_missing_fraction()],
    };
    for (k, step) in plan.steps.iter().enumerate() {
        let n = current.n_rows;
        if let Some(t) = current
            .columns
            .iter()
            .find(|c| c.meta.role == Role::Target && !step.keeps(c, n))
        {
            return Err(Error::PlanRemovesTarget {
                step: k,
                column: t.meta.name.clone(),
            });
        }
        current = current.retain_columns(&|c| step.keeps(c, n));
        trace.counts.push(current.n_columns());
        trace.steps.push(step.to_string());
        trace
            .missing_pct
            .push(100.0 * current.dataset_missing_fraction());
    }
    if !plan.steps.is_empty() && current.n_features() == 0 {
        return Err(Error::EmptyResult);
    }
    Ok((current, trace))
}

/// Seeded row partition: `round(n * test_fraction)` rows go to the test side.
/// Both index lists are returned in ascending order.
pub fn split_indices(n_rows: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n_test = (n_rows as f64 * test_fraction).round() as usize;
    if n_rows < 2 || n_test == 0 || n_test >= n_rows {
        return Err(Error::InvalidSplit(format!(
            "{n_rows} rows at fraction {test_fraction} leaves an empty partition"
        )));
    }
    let mut idx: Vec<usize> = (0..n_rows).collect();
    idx.shuffle(&mut rng::rng(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn split(table: &Table, test_fraction: f64, seed: u64) -> Result<(Table, Table)> {
    let (train, test) = split_indices(table.n_rows(), test_fraction, seed)?;
    Ok((table.take_rows(&train), table.take_rows(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_ab() -> Vec<ColumnMeta> {
        vec![
            ColumnMeta::new("a", Kind::Continuous),
            ColumnMeta::new("b", Kind::Nominal).with_role(Role::Target),
        ]
    }

    fn load(text: &str, schema: &[ColumnMeta]) -> Result<Table> {
        read_csv(text.as_bytes(), schema, &LoadOptions::default())
    }

    #[test]
    fn empty_cell_is_unobserved() {
        let t = load("a,b\n1.5,x\n,y\n2,x\n", &schema_ab()).unwrap();
        let a = t.column("a").unwrap();
        assert_eq!(a.observed, vec![true, false, true]);
        assert!((a.meta.missing_fraction - 1.0 / 3.0).abs() < 1e-15);
        let b = t.column("b").unwrap();
        assert_eq!(b.values, vec![0.0, 1.0, 0.0]);
        assert_eq!(b.labels.as_deref(), Some(&["x".to_string(), "y".to_string()][..]));
    }

    #[test]
    fn na_token_and_garbage_are_missing_not_errors() {
        let t = load("a,b\nNA,x\nabc,y\n3,z\n", &schema_ab()).unwrap();
        assert_eq!(t.column("a").unwrap().observed, vec![false, false, true]);
    }

    #[test]
    fn header_missing_schema_column_is_error() {
        let err = load("a\n1\n", &schema_ab()).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(_)));
        let err = load("a,b,c\n1,x,2\n", &schema_ab()).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(_)));
    }

    #[test]
    fn duplicate_header_is_error() {
        let err = load("a,a\n1,2\n", &schema_ab()).unwrap_err();
        assert!(matches!(err, Error::DuplicateColumn(_)));
        let mut dup = schema_ab();
        dup[1].name = "a".into();
        assert!(matches!(
            load("a,b\n1,x\n", &dup).unwrap_err(),
            Error::DuplicateColumn(_)
        ));
    }

    #[test]
    fn cardinality_limit() {
        let opts = LoadOptions {
            max_cardinality: 2,
            ..LoadOptions::default()
        };
        let err = read_csv("a,b\n1,x\n2,y\n3,z\n".as_bytes(), &schema_ab(), &opts).unwrap_err();
        assert!(matches!(err, Error::Cardinality { .. }));
    }

    #[test]
    fn missingness_counts() {
        let t = Table::new(vec![
            Column::new(ColumnMeta::new("a", Kind::Continuous), vec![1.0, 2.0], vec![true, false]),
            Column::complete(ColumnMeta::new("b", Kind::Continuous), vec![1.0, 2.0]),
        ])
        .unwrap();
        let (_, pct) = recompute_missingness(&t);
        assert_eq!(pct, 25.0);
        let full = Table::new(vec![Column::complete(
            ColumnMeta::new("b", Kind::Continuous),
            vec![1.0, 2.0],
        )])
        .unwrap();
        assert_eq!(recompute_missingness(&full).1, 0.0);
    }

    fn column_with_missing(name: &str, n: usize, missing: usize) -> Column {
        let obs: Vec<bool> = (0..n).map(|i| i >= missing).collect();
        Column::new(ColumnMeta::new(name, Kind::Continuous), vec![1.0; n], obs)
    }

    #[test]
    fn min_observed_boundary() {
        let target = Column::complete(
            ColumnMeta::new("y", Kind::Continuous).with_role(Role::Target),
            vec![0.0; 100],
        );
        let t = Table::new(vec![
            column_with_missing("keep40", 100, 40),
            column_with_missing("drop41", 100, 41),
            target,
        ])
        .unwrap();
        let plan = FilterPlan {
            steps: vec![FilterStep::MinObserved { threshold: 0.6 }],
        };
        let (out, trace) = apply_filter_plan(&t, &plan).unwrap();
        assert_eq!(out.names(), vec!["keep40", "y"]);
        assert_eq!(trace.counts, vec![3, 2]);
    }

    #[test]
    fn empty_plan_is_identity() {
        let t = load("a,b\n1,x\n2,y\n", &schema_ab()).unwrap();
        let (out, trace) = apply_filter_plan(&t, &FilterPlan::default()).unwrap();
        assert_eq!(out, t);
        assert_eq!(trace.counts, vec![2]);
    }

    #[test]
    fn plan_removing_target_errors() {
        let t = load("a,b\n1,x\n2,y\n", &schema_ab()).unwrap();
        let plan = FilterPlan {
            steps: vec![FilterStep::KeepKinds {
                kinds: [Kind::Continuous].into_iter().collect(),
            }],
        };
        assert!(matches!(
            apply_filter_plan(&t, &plan).unwrap_err(),
            Error::PlanRemovesTarget { .. }
        ));
        let plan = FilterPlan {
            steps: vec![FilterStep::KeepKinds {
                kinds: [Kind::Nominal].into_iter().collect(),
            }],
        };
        assert!(matches!(
            apply_filter_plan(&t, &plan).unwrap_err(),
            Error::EmptyResult
        ));
        let bad = FilterPlan {
            steps: vec![FilterStep::MinObserved { threshold: 1.5 }],
        };
        assert!(matches!(apply_filter_plan(&t, &bad).unwrap_err(), Error::InvalidPlan(_)));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (tr, te) = split_indices(10, 0.2, 7).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert_eq!(split_indices(10, 0.2, 7).unwrap(), (tr, te.clone()));
        let differs = (8..20).any(|s| split_indices(10, 0.2, s).unwrap().1 != te);
        assert!(differs);
        let (tr, te) = split_indices(800, 0.2, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (640, 160));
        assert!(split_indices(3, 0.1, 1).is_err());
        assert!(split_indices(1, 0.5, 1).is_err());
    }

    #[test]
    fn filter_plan_json_shape() {
        let plan: FilterPlan = serde_json::from_str(
            r#"{"steps":[{"drop_stage":{"stages":["postnatal"]}},{"min_observed":{"threshold":0.6}},
               {"keep_kinds":{"kinds":["continuous","ordinal"]}},{"drop_lineage":{"lineages":["other"]}}]}"#,
        )
        .unwrap();
        assert_eq!(plan.steps.len(), 4);
    }
}
