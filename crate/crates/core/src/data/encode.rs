use super::{ColumnData, Matrix, TabularDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum ColumnEncoder {
    Numeric { median: f64, mean: f64, scale: f64 },
    Categorical { mode: u32, n_levels: usize },
}

/// Imputation and encoding statistics fitted on a set of training rows.
///
/// Numeric columns are median-imputed and standardised; categorical columns
/// are mode-imputed and one-hot encoded over every level of the dataset
/// vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    columns: Vec<ColumnEncoder>,
    column_origin: Vec<usize>,
    column_names: Vec<String>,
}

/// Encoded feature matrix. `column_origin[j]` is the source feature index of
/// encoded column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub column_origin: Vec<usize>,
    pub column_names: Vec<String>,
    pub origin_names: Vec<String>,
}

impl EncodedMatrix {
    /// Encoded column indices belonging to the given source features.
    pub fn columns_of(&self, features: &[usize]) -> Vec<usize> {
        self.column_origin
            .iter()
            .enumerate()
            .filter(|(_, o)| features.contains(o))
            .map(|(j, _)| j)
            .collect()
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

impl Encoder {
    pub fn fit(ds: &TabularDataset, rows: &[usize]) -> Result<Self> {
        let mut columns = Vec::with_capacity(ds.n_features());
        let mut column_origin = Vec::new();
        let mut column_names = Vec::new();
        for (idx, col) in ds.features().iter().enumerate() {
            let name = &col.spec.name;
            let all_missing = || Error::Encoding {
                column: name.clone(),
                message: "all values missing".into(),
            };
            match &col.data {
                ColumnData::Numeric(values) => {
                    let observed: Vec<f64> = rows.iter().filter_map(|&r| values[r]).collect();
                    if observed.is_empty() {
                        return Err(all_missing());
                    }
                    let median = median(observed);
                    let n = rows.len() as f64;
                    let filled = rows.iter().map(|&r| values[r].unwrap_or(median));
                    let mean = filled.clone().sum::<f64>() / n;
                    let var = filled.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let std = var.sqrt();
                    let scale = if std > 1e-12 { std } else { 1.0 };
                    columns.push(ColumnEncoder::Numeric {
                        median,
                        mean,
                        scale,
                    });
                    column_origin.push(idx);
                    column_names.push(name.clone());
                }
                ColumnData::Categorical { levels, codes } => {
                    let mut counts = vec![0usize; levels.len()];
                    for &r in rows {
                        if let Some(c) = codes[r] {
                            counts[c as usize] += 1;
                        }
                    }
                    if counts.iter().all(|&c| c == 0) {
                        return Err(all_missing());
                    }
                    // First level wins ties.
                    let mode = counts
                        .iter()
                        .enumerate()
                        .fold(0, |best, (i, &c)| if c > counts[best] { i } else { best });
                    columns.push(ColumnEncoder::Categorical {
                        mode: mode as u32,
                        n_levels: levels.len(),
                    });
                    for level in levels {
                        column_origin.push(idx);
                        column_names.push(format!("{name}={level}"));
                    }
                }
            }
        }
        Ok(Self {
            columns,
            column_origin,
            column_names,
        })
    }

    pub fn n_encoded(&self) -> usize {
        self.column_origin.len()
    }

    /// Category code of `row` in feature `col`, with missing replaced by the
    /// fitted mode. `None` for numeric columns.
    pub fn imputed_code(&self, ds: &TabularDataset, col: usize, row: usize) -> Option<u32> {
        match (&self.columns[col], &ds.feature(col).data) {
            (ColumnEncoder::Categorical { mode, .. }, ColumnData::Categorical { codes, .. }) => {
                Some(codes[row].unwrap_or(*mode))
            }
            _ => None,
        }
    }

    pub fn transform(&self, ds: &TabularDataset, rows: &[usize]) -> Result<EncodedMatrix> {
        if ds.n_features() != self.columns.len() {
            return Err(Error::Contract(format!(
                "encoder fitted on {} features, dataset has {}",
                self.columns.len(),
                ds.n_features()
            )));
        }
        let n_cols = self.n_encoded();
        let mut m = Matrix::zeros(rows.len(), n_cols);
        let mut offset = 0;
        for (enc, col) in self.columns.iter().zip(ds.features()) {
            match (enc, &col.data) {
                (
                    ColumnEncoder::Numeric {
                        median,
                        mean,
                        scale,
                    },
                    ColumnData::Numeric(values),
                ) => {
                    for (i, &r) in rows.iter().enumerate() {
                        let v = values[r].unwrap_or(*median);
                        m.set(i, offset, (v - mean) / scale);
                    }
                    offset += 1;
                }
                (ColumnEncoder::Categorical { mode, n_levels }, ColumnData::Categorical { codes, .. }) => {
                    for (i, &r) in rows.iter().enumerate() {
                        let c = codes[r].unwrap_or(*mode) as usize;
                        m.set(i, offset + c, 1.0);
                    }
                    offset += n_levels;
                }
                _ => {
                    return Err(Error::Contract(format!(
                        "column `{}` changed kind since fitting",
                        col.spec.name
                    )))
                }
            }
        }
        let names = ds.feature_names();
        Ok(EncodedMatrix {
            features: m,
            labels: rows.iter().map(|&r| ds.labels()[r]).collect(),
            origin_names: self.column_origin.iter().map(|&o| names[o].clone()).collect(),
            column_origin: self.column_origin.clone(),
            column_names: self.column_names.clone(),
        })
    }
}

/// Fits imputation/encoding on every row of `ds` and encodes it.
pub fn impute_and_encode(ds: &TabularDataset) -> Result<EncodedMatrix> {
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    Encoder::fit(ds, &rows)?.transform(ds, &rows)
}
