//! Credit-scoring style datasets: CSV ingestion and a planted generator.

use std::path::Path;

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngKey;

/// Base features `a0_i` (one row per sample) and labels `b_i` in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CreditData {
    features: DMatrix<f64>,
    labels: Vec<f64>,
}

impl CreditData {
    pub fn new(features: DMatrix<f64>, labels: Vec<f64>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if labels.iter().any(|b| *b != 1.0 && *b != -1.0) {
            return Err(Error::Data("labels must be -1 or +1".into()));
        }
        Ok(CreditData { features, labels })
    }

    pub fn rows(&self) -> usize {
        self.features.nrows()
    }
    pub fn cols(&self) -> usize {
        self.features.ncols()
    }
    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }
    #[inline]
    pub fn feature(&self, row: usize, col: usize) -> f64 {
        self.features[(row, col)]
    }
    #[inline]
    pub fn label(&self, row: usize) -> f64 {
        self.labels[row]
    }

    /// Keeps `count` rows chosen uniformly without replacement, in their
    /// original order.
    pub fn subsample(&self, count: usize, seed: u64) -> CreditData {
        if count >= self.rows() {
            return self.clone();
        }
        let mut idx = sample(&mut RngKey::new(seed).rng(), self.rows(), count).into_vec();
        idx.sort_unstable();
        CreditData {
            features: self.features.select_rows(&idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Centers every column and scales it to unit variance. Constant
    /// columns are only centered.
    pub fn standardize(&mut self) {
        let rows = self.rows() as f64;
        for mut col in self.features.column_iter_mut() {
            let mean = col.sum() / rows;
            col.add_scalar_mut(-mean);
            let var = col.norm_squared() / rows;
            if var > 0.0 {
                col /= var.sqrt();
            }
        }
    }
}

/// Column roles for [`load_credit_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub label_column: String,
    /// Feature columns to keep; `None` keeps every named non-label column.
    pub feature_columns: Option<Vec<String>>,
    /// Subsample to at most this many rows after dropping incomplete ones.
    pub max_rows: Option<usize>,
    pub subsample_seed: u64,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            label_column: "SeriousDlqin2yrs".into(),
            feature_columns: None,
            max_rows: Some(200),
            subsample_seed: 0,
        }
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan")
}

/// Reads a headed, comma-separated file. Labels `0/1` map to `-1/+1`;
/// rows with a missing cell in a used column are dropped; features are
/// standardized after optional subsampling.
pub fn load_credit_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<CreditData> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    if headers.is_empty() {
        return Err(Error::Data(format!("{}: missing header row", path.display())));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Data(format!("{}: no column named {name:?}", path.display())))
    };
    let label_col = find(&schema.label_column)?;
    let feature_cols: Vec<usize> = match &schema.feature_columns {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, h)| *i != label_col && !h.trim().is_empty())
            .map(|(i, _)| i)
            .collect(),
    };
    if feature_cols.is_empty() {
        return Err(Error::Data(format!("{}: no feature columns", path.display())));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2;
        let record = record.map_err(|e| Error::Data(format!("{}:{line}: {e}", path.display())))?;
        let used = std::iter::once(label_col).chain(feature_cols.iter().copied());
        if used.clone().any(|c| record.get(c).is_none_or(is_missing)) {
            dropped += 1;
            continue;
        }
        let parse = |c: usize| -> Result<f64> {
            let cell = record[c].trim();
            cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::Data(format!(
                    "{}:{line}: column {:?} has non-numeric value {cell:?}",
                    path.display(),
                    &headers[c]
                ))
            })
        };
        let label = match parse(label_col)? {
            0.0 => -1.0,
            1.0 => 1.0,
            v => {
                return Err(Error::Data(format!(
                    "{}:{line}: label must be 0 or 1, got {v}",
                    path.display()
                )))
            }
        };
        for &c in &feature_cols {
            values.push(parse(c)?);
        }
        labels.push(label);
    }
    if dropped > 0 {
        warn!("{}: dropped {dropped} rows with missing values", path.display());
    }
    if labels.is_empty() {
        return Err(Error::Data(format!("{}: no usable rows", path.display())));
    }
    let features = DMatrix::from_row_slice(labels.len(), feature_cols.len(), &values);
    let mut data = CreditData::new(features, labels)?;
    if let Some(max) = schema.max_rows {
        data = data.subsample(max, schema.subsample_seed);
    }
    data.standardize();
    info!(
        "{}: using {} rows x {} features ({dropped} dropped)",
        path.display(),
        data.rows(),
        data.cols()
    );
    Ok(data)
}

/// Gaussian features with labels drawn from a planted logistic model
/// `P(b = +1) = sigmoid(a^T w)`, `w ~ N(0, I)`.
pub fn generate_synthetic_credit(n_rows: usize, n_features: usize, seed: u64) -> Result<CreditData> {
    if n_rows < 2 || n_features < 1 {
        return Err(Error::Config(format!(
            "synthetic credit data needs >= 2 rows and >= 1 feature, got {n_rows} x {n_features}"
        )));
    }
    let key = RngKey::new(seed);
    let mut rng = key.child(0).rng();
    let planted = DVector::from_fn(n_features, |_, _| StandardNormal.sample(&mut rng));
    let features = DMatrix::from_fn(n_rows, n_features, |_, _| StandardNormal.sample(&mut rng));
    let mut rng = key.child(1).rng();
    let labels = (0..n_rows)
        .map(|i| {
            let z: f64 = features.row(i).transpose().dot(&planted);
            let p = 1.0 / (1.0 + (-z).exp());
            if rng.random::<f64>() < p {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    CreditData::new(features, labels)
}
