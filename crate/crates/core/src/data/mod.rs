//! Dataset ingestion, typing and splitting.

mod encode;
mod matrix;
mod split;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{impute_and_encode, EncodedMatrix, Encoder};
pub use matrix::Matrix;
pub use split::{stratified_kfold, stratified_subsample, train_validation_split, FoldPlan};

/// Age bin labels in ascending order.
pub const AGE_BINS: [&str; 3] = ["<25", "25-60", ">60"];

const MISSING_TOKENS: [&str; 2] = ["", "?"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default)]
    pub is_sensitive: bool,
    #[serde(default)]
    pub is_label: bool,
}

/// Column declarations for a CSV file.
///
/// `positive_label` overrides the default choice of the minority class as the
/// positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_label: Option<String>,
}

impl Schema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Schema(format!("{}: {e}", path.as_ref().display())))?;
        let schema: Schema = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.as_ref().display())))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self.columns.iter().filter(|c| c.is_label).count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "exactly one label column required, found {labels}"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
            if c.is_label && c.is_sensitive {
                return Err(Error::Schema(format!(
                    "label column `{}` cannot be sensitive",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// Replaces the sensitive flags with the given attribute list.
    pub fn with_sensitive(mut self, names: &[String]) -> Result<Self> {
        for n in names {
            if !self.columns.iter().any(|c| &c.name == n && !c.is_label) {
                return Err(Error::Schema(format!("unknown sensitive attribute `{n}`")));
            }
        }
        for c in &mut self.columns {
            c.is_sensitive = names.contains(&c.name);
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    /// `codes[i]` indexes into `levels`; levels are sorted unless produced by
    /// age discretisation, where they follow bin order.
    Categorical {
        levels: Vec<String>,
        codes: Vec<Option<u32>>,
    },
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Numeric(v) => v[row].is_none(),
            ColumnData::Categorical { codes, .. } => codes[row].is_none(),
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub spec: ColumnSpec,
    pub data: ColumnData,
}

/// A typed table with a binary label. Feature columns keep file order with
/// the label column removed.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    features: Vec<Column>,
    label_name: String,
    labels: Vec<u8>,
    positive_label: String,
    negative_label: String,
}

impl TabularDataset {
    pub fn new(
        features: Vec<Column>,
        label_name: impl Into<String>,
        labels: Vec<u8>,
        positive_label: impl Into<String>,
        negative_label: impl Into<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Schema("dataset has no rows".into()));
        }
        if let Some(c) = features.iter().find(|c| c.data.len() != n) {
            return Err(Error::Schema(format!(
                "column `{}` has {} rows, expected {n}",
                c.spec.name,
                c.data.len()
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Schema("labels must be 0 or 1".into()));
        }
        for c in &features {
            if c.spec.is_sensitive && !matches!(c.data, ColumnData::Categorical { .. }) {
                return Err(Error::Schema(format!(
                    "sensitive column `{}` must be categorical",
                    c.spec.name
                )));
            }
        }
        Ok(Self {
            features,
            label_name: label_name.into(),
            labels,
            positive_label: positive_label.into(),
            negative_label: negative_label.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Column] {
        &self.features
    }

    pub fn feature(&self, idx: usize) -> &Column {
        &self.features[idx]
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|c| c.spec.name.clone()).collect()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn positive_label(&self) -> &str {
        &self.positive_label
    }

    pub fn negative_label(&self) -> &str {
        &self.negative_label
    }

    /// Indices of sensitive feature columns.
    pub fn sensitive_indices(&self) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, c)| c.spec.is_sensitive)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn positive_proportion(&self) -> f64 {
        let pos = self.labels.iter().filter(|&&y| y == 1).count();
        pos as f64 / self.n_rows() as f64
    }

    /// A new dataset holding `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let features = self
            .features
            .iter()
            .map(|c| Column {
                spec: c.spec.clone(),
                data: c.data.select(rows),
            })
            .collect();
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Self::new(
            features,
            self.label_name.clone(),
            labels,
            self.positive_label.clone(),
            self.negative_label.clone(),
        )
    }

    /// Per-category proportions of a categorical column over `rows`, keyed by
    /// level name. Missing cells are skipped.
    pub fn category_proportions(&self, col: usize, rows: &[usize]) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        if let ColumnData::Categorical { levels, codes } = &self.features[col].data {
            let mut counts = vec![0usize; levels.len()];
            let mut total = 0usize;
            for &r in rows {
                if let Some(c) = codes[r] {
                    counts[c as usize] += 1;
                    total += 1;
                }
            }
            for (level, count) in levels.iter().zip(counts) {
                let p = if total == 0 {
                    0.0
                } else {
                    count as f64 / total as f64
                };
                out.insert(level.clone(), p);
            }
        }
        out
    }
}

fn is_missing_token(tok: &str) -> bool {
    MISSING_TOKENS.contains(&tok.trim())
}

/// Maps an age to its bin; missing stays missing.
pub fn discretize_age_value(v: Option<f64>) -> Option<&'static str> {
    let v = v?;
    Some(if v < 25.0 {
        AGE_BINS[0]
    } else if v <= 60.0 {
        AGE_BINS[1]
    } else {
        AGE_BINS[2]
    })
}

/// Bins a numeric age column into `<25`, `25-60` (both ends inclusive) and
/// `>60`.
pub fn discretize_age(values: &[Option<f64>]) -> Result<ColumnData> {
    if let Some(v) = values.iter().flatten().find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::Contract(format!("age must be non-negative, got {v}")));
    }
    let codes = values
        .iter()
        .map(|&v| {
            discretize_age_value(v).map(|bin| AGE_BINS.iter().position(|b| *b == bin).unwrap() as u32)
        })
        .collect();
    Ok(ColumnData::Categorical {
        levels: AGE_BINS.iter().map(|s| s.to_string()).collect(),
        codes,
    })
}

/// Reads a headed, comma-separated file typed by `schema`.
///
/// Sensitive columns declared numeric are age-discretised. Empty and `?` cells
/// are missing. The positive class is the minority label unless the schema
/// names one.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<TabularDataset> {
    let bytes = fs::read(path.as_ref())?;
    parse_csv(&bytes, schema)
}

pub fn parse_csv(bytes: &[u8], schema: &Schema) -> Result<TabularDataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header: Vec<String> = match reader.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].is_empty()) => {
            h.iter().map(str::to_string).collect()
        }
        Ok(_) => {
            return Err(Error::Parse {
                row: 0,
                message: "missing header".into(),
            })
        }
        Err(e) => {
            return Err(Error::Parse {
                row: 0,
                message: e.to_string(),
            })
        }
    };
    for name in &header {
        if !schema.columns.iter().any(|c| &c.name == name) {
            return Err(Error::Schema(format!("column `{name}` not declared in schema")));
        }
    }
    let positions: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == &c.name)
                .ok_or_else(|| Error::Schema(format!("schema column `{}` not in header", c.name)))
        })
        .collect::<Result<_>>()?;

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); schema.columns.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        for (col, &pos) in positions.iter().enumerate() {
            raw[col].push(record[pos].to_string());
        }
    }
    let n_rows = raw.first().map_or(0, Vec::len);
    if n_rows == 0 {
        return Err(Error::Parse {
            row: 0,
            message: "no data rows".into(),
        });
    }

    let mut features = Vec::new();
    let mut label = None;
    for (spec, cells) in schema.columns.iter().zip(raw) {
        if spec.is_label {
            label = Some((spec, cells));
            continue;
        }
        let data = match spec.kind {
            ColumnKind::Numeric => {
                let values = parse_numeric(&spec.name, &cells)?;
                if spec.is_sensitive {
                    discretize_age(&values)?
                } else {
                    ColumnData::Numeric(values)
                }
            }
            ColumnKind::Categorical => categorical_from_tokens(&cells),
        };
        features.push(Column {
            spec: ColumnSpec {
                kind: match data {
                    ColumnData::Numeric(_) => ColumnKind::Numeric,
                    ColumnData::Categorical { .. } => ColumnKind::Categorical,
                },
                ..spec.clone()
            },
            data,
        });
    }
    let (label_spec, label_cells) = label.expect("validated schema has a label");
    let (labels, positive, negative) =
        binarize_labels(&label_spec.name, &label_cells, schema.positive_label.as_deref())?;
    TabularDataset::new(features, label_spec.name.clone(), labels, positive, negative)
}

fn parse_numeric(name: &str, cells: &[String]) -> Result<Vec<Option<f64>>> {
    cells
        .iter()
        .enumerate()
        .map(|(i, tok)| {
            if is_missing_token(tok) {
                Ok(None)
            } else {
                tok.trim().parse::<f64>().map(Some).map_err(|_| Error::Parse {
                    row: i + 1,
                    message: format!("column `{name}`: `{tok}` is not numeric"),
                })
            }
        })
        .collect()
}

fn categorical_from_tokens(cells: &[String]) -> ColumnData {
    let mut levels: Vec<String> = cells
        .iter()
        .filter(|t| !is_missing_token(t))
        .map(|t| t.trim().to_string())
        .collect();
    levels.sort();
    levels.dedup();
    let codes = cells
        .iter()
        .map(|t| {
            if is_missing_token(t) {
                None
            } else {
                levels
                    .binary_search_by(|l| l.as_str().cmp(t.trim()))
                    .ok()
                    .map(|i| i as u32)
            }
        })
        .collect();
    ColumnData::Categorical { levels, codes }
}

fn binarize_labels(
    name: &str,
    cells: &[String],
    positive_override: Option<&str>,
) -> Result<(Vec<u8>, String, String)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        if is_missing_token(c) {
            return Err(Error::Schema(format!("label `{name}` missing at row {}", i + 1)));
        }
        *counts.entry(c.trim()).or_default() += 1;
    }
    if counts.len() != 2 {
        return Err(Error::Schema(format!(
            "label `{name}` must have exactly 2 distinct values, found {}",
            counts.len()
        )));
    }
    let entries: Vec<(&str, usize)> = counts.into_iter().collect();
    let positive = match positive_override {
        Some(p) => {
            if !entries.iter().any(|(l, _)| *l == p) {
                return Err(Error::Schema(format!(
                    "positive label `{p}` not present in `{name}`"
                )));
            }
            p.to_string()
        }
        // Minority class; ties go to the lexicographically larger label.
        None => {
            if entries[0].1 < entries[1].1 {
                entries[0].0.to_string()
            } else {
                entries[1].0.to_string()
            }
        }
    };
    let negative = entries
        .iter()
        .find(|(l, _)| *l != positive)
        .map(|(l, _)| l.to_string())
        .unwrap();
    let labels = cells
        .iter()
        .map(|c| u8::from(c.trim() == positive))
        .collect();
    Ok((labels, positive, negative))
}
