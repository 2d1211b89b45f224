//! Raw table to numeric design matrix: ordinal encoding, median
//! imputation, min-max scaling and the seeded train/test split.
//!
//! Encoding is fitted on the whole table (the category domain is part of
//! the dataset definition). Imputation and normalization are fitted on
//! training rows only and then applied to both partitions.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CrlError, Result};
use crate::ingest::{Cell, ColumnKind, RawTable};
use crate::matrix::Matrix;

/// Sorted labels of one categorical column; a label's code is its index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCodes {
    pub column: String,
    pub labels: Vec<String>,
}

impl CategoryCodes {
    pub fn code(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EncodingMap {
    pub columns: Vec<CategoryCodes>,
}

impl EncodingMap {
    pub fn for_column(&self, name: &str) -> Option<&CategoryCodes> {
        self.columns.iter().find(|c| c.column == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillValue {
    pub column: String,
    pub value: f64,
}

/// Per-column fill values (lower median of observed training values).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImputationPolicy {
    pub columns: Vec<FillValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub column: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub columns: Vec<ColumnRange>,
}

/// Everything needed to turn raw rows into model inputs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FittedParams {
    pub encoding: EncodingMap,
    pub imputation: ImputationPolicy,
    pub normalization: NormalizationParams,
}

/// Feature columns after encoding, column-major; `NaN` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTable {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl EncodedTable {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// Keeps only the named columns, in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<Self> {
        let mut columns = Vec::with_capacity(names.len());
        for n in names {
            let col = self
                .column(n)
                .ok_or_else(|| CrlError::MissingColumn(n.clone()))?;
            columns.push(col.to_vec());
        }
        Ok(Self {
            names: names.to_vec(),
            columns,
            labels: self.labels.clone(),
        })
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| indices.iter().map(|&i| c[i]).collect())
                .collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Row-major matrix; fails if any cell is still missing.
    pub fn to_matrix(&self) -> Result<Matrix> {
        let n = self.n_rows();
        let d = self.columns.len();
        let mut m = Matrix::zeros(n, d);
        for (j, col) in self.columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                if v.is_nan() {
                    return Err(CrlError::AllMissingColumn(self.names[j].clone()));
                }
                m.set(i, j, v);
            }
        }
        Ok(m)
    }
}

/// Numeric features plus binary labels and the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub column_names: Vec<String>,
    pub params: FittedParams,
}

impl DesignMatrix {
    pub fn new(features: Matrix, labels: Vec<u8>, column_names: Vec<String>) -> Result<Self> {
        if features.n_rows() != labels.len() {
            return Err(CrlError::LengthMismatch {
                left: features.n_rows(),
                right: labels.len(),
            });
        }
        if features.n_cols() != column_names.len() {
            return Err(CrlError::LengthMismatch {
                left: features.n_cols(),
                right: column_names.len(),
            });
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(CrlError::NonBinaryLabels);
        }
        Ok(Self {
            features,
            labels,
            column_names,
            params: FittedParams::default(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            column_names: self.column_names.clone(),
            params: self.params.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.75,
            seed: 42,
        }
    }
}

impl SplitConfig {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(CrlError::Config(format!(
                "train fraction must lie in (0,1), got {train_fraction}"
            )));
        }
        Ok(Self {
            train_fraction,
            seed,
        })
    }

    pub fn train_size(&self, n: usize) -> usize {
        (self.train_fraction * n as f64).floor() as usize
    }
}

/// Sort key for category labels: byte order of the uppercased label, then
/// the label itself so distinct labels never compare equal.
fn label_order(a: &str, b: &str) -> std::cmp::Ordering {
    a.to_uppercase()
        .as_bytes()
        .cmp(b.to_uppercase().as_bytes())
        .then_with(|| a.cmp(b))
}

pub fn fit_encoding(table: &RawTable) -> Result<EncodingMap> {
    if table.row_count() == 0 {
        return Err(CrlError::EmptyDataset);
    }
    let mut columns = Vec::new();
    for (i, spec) in table.schema().columns().iter().enumerate() {
        if spec.kind != ColumnKind::Categorical {
            continue;
        }
        let distinct: HashSet<&str> = table
            .column(i)
            .filter_map(|c| match c {
                Cell::Category(s) => Some(s.as_str()),
                _ => None,
            })
            .collect();
        let mut labels: Vec<String> = distinct.into_iter().map(str::to_string).collect();
        labels.sort_by(|a, b| label_order(a, b));
        columns.push(CategoryCodes {
            column: spec.name.clone(),
            labels,
        });
    }
    Ok(EncodingMap { columns })
}

/// Replaces every categorical cell by its code. All non-target columns are
/// returned in schema order.
pub fn apply_encoding(table: &RawTable, map: &EncodingMap) -> Result<EncodedTable> {
    let schema = table.schema();
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for (i, spec) in schema.feature_columns() {
        let codes = match spec.kind {
            ColumnKind::Categorical => Some(
                map.for_column(&spec.name)
                    .ok_or_else(|| CrlError::MissingColumn(spec.name.clone()))?,
            ),
            _ => None,
        };
        let mut col = Vec::with_capacity(table.row_count());
        for cell in table.column(i) {
            let v = match (cell, codes) {
                (Cell::Numeric(v), _) => *v,
                (Cell::Missing, _) => f64::NAN,
                (Cell::Category(label), Some(codes)) => {
                    codes.code(label).ok_or_else(|| CrlError::UnknownCategory {
                        column: spec.name.clone(),
                        label: label.clone(),
                    })? as f64
                }
                (Cell::Category(_), None) => f64::NAN,
            };
            col.push(v);
        }
        names.push(spec.name.clone());
        columns.push(col);
    }
    Ok(EncodedTable {
        names,
        columns,
        labels: table.labels(),
    })
}

/// Lower median: element `(n-1)/2` of the sorted observed values.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    let mut observed: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if observed.is_empty() {
        return None;
    }
    observed.sort_by(f64::total_cmp);
    Some(observed[(observed.len() - 1) / 2])
}

pub fn fit_impute(train: &EncodedTable) -> Result<ImputationPolicy> {
    let mut columns = Vec::with_capacity(train.names.len());
    for (name, col) in train.names.iter().zip(&train.columns) {
        let value = lower_median(col).ok_or_else(|| CrlError::AllMissingColumn(name.clone()))?;
        columns.push(FillValue {
            column: name.clone(),
            value,
        });
    }
    Ok(ImputationPolicy { columns })
}

pub fn apply_impute(table: &EncodedTable, policy: &ImputationPolicy) -> Result<EncodedTable> {
    let mut out = table.clone();
    for (name, col) in out.names.iter().zip(out.columns.iter_mut()) {
        let fill = policy
            .columns
            .iter()
            .find(|f| &f.column == name)
            .ok_or_else(|| CrlError::SchemaMismatch(format!("no fill value for `{name}`")))?
            .value;
        for v in col.iter_mut().filter(|v| v.is_nan()) {
            *v = fill;
        }
    }
    Ok(out)
}

pub fn fit_normalizer(train: &Matrix, names: &[String]) -> Result<NormalizationParams> {
    if names.len() != train.n_cols() {
        return Err(CrlError::LengthMismatch {
            left: names.len(),
            right: train.n_cols(),
        });
    }
    if train.n_rows() == 0 {
        return Err(CrlError::EmptyDataset);
    }
    let mut columns = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..train.n_rows() {
            let v = train.get(i, j);
            min = min.min(v);
            max = max.max(v);
        }
        if !min.is_finite() || !max.is_finite() {
            return Err(CrlError::AllMissingColumn(name.clone()));
        }
        columns.push(ColumnRange {
            column: name.clone(),
            min,
            max,
        });
    }
    Ok(NormalizationParams { columns })
}

#[inline]
pub fn scale_value(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((v - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn apply_normalizer(m: &Matrix, params: &NormalizationParams) -> Result<Matrix> {
    if params.columns.len() != m.n_cols() {
        return Err(CrlError::DimensionMismatch {
            expected: params.columns.len(),
            got: m.n_cols(),
        });
    }
    let mut out = m.clone();
    for i in 0..m.n_rows() {
        for (j, r) in params.columns.iter().enumerate() {
            out.set(i, j, scale_value(m.get(i, j), r.min, r.max));
        }
    }
    Ok(out)
}

/// Seeded Fisher–Yates permutation of `0..n`, cut at `floor(fraction * n)`.
pub fn split_indices(n: usize, config: &SplitConfig) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    let cut = config.train_size(n);
    let test = idx.split_off(cut);
    (idx, test)
}

pub fn train_test_split(
    matrix: &DesignMatrix,
    config: &SplitConfig,
) -> Result<(DesignMatrix, DesignMatrix)> {
    if matrix.n_rows() < 2 {
        return Err(CrlError::EmptyDataset);
    }
    let (train, test) = split_indices(matrix.n_rows(), config);
    Ok((matrix.select_rows(&train), matrix.select_rows(&test)))
}

/// Result of running the full preprocessing stage on a table.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: DesignMatrix,
    pub test: DesignMatrix,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Encode, split, fit imputation and scaling on the training rows, then
/// transform both partitions. Only `features` are kept, in that order.
pub fn prepare(table: &RawTable, features: &[String], split: &SplitConfig) -> Result<PreparedData> {
    if table.row_count() < 2 {
        return Err(CrlError::EmptyDataset);
    }
    let encoding = fit_encoding(table)?;
    let encoded = apply_encoding(table, &encoding)?.select_columns(features)?;
    let (train_indices, test_indices) = split_indices(encoded.n_rows(), split);

    let train_raw = encoded.select_rows(&train_indices);
    let imputation = fit_impute(&train_raw)?;
    let train_filled = apply_impute(&train_raw, &imputation)?.to_matrix()?;
    let normalization = fit_normalizer(&train_filled, features)?;

    let params = FittedParams {
        encoding,
        imputation,
        normalization,
    };
    let train = DesignMatrix {
        features: apply_normalizer(&train_filled, &params.normalization)?,
        labels: train_raw.labels,
        column_names: features.to_vec(),
        params: params.clone(),
    };
    let test = transform(&encoded.select_rows(&test_indices), &params)?;
    Ok(PreparedData {
        train,
        test,
        train_indices,
        test_indices,
    })
}

fn transform(encoded: &EncodedTable, params: &FittedParams) -> Result<DesignMatrix> {
    let filled = apply_impute(encoded, &params.imputation)?.to_matrix()?;
    Ok(DesignMatrix {
        features: apply_normalizer(&filled, &params.normalization)?,
        labels: encoded.labels.clone(),
        column_names: encoded.names.clone(),
        params: params.clone(),
    })
}

impl FittedParams {
    /// Feature names covered by the fitted scaling, in model input order.
    pub fn feature_names(&self) -> Vec<String> {
        self.normalization
            .columns
            .iter()
            .map(|c| c.column.clone())
            .collect()
    }

    /// Applies already-fitted parameters to new raw rows.
    pub fn transform_table(&self, table: &RawTable) -> Result<DesignMatrix> {
        let encoded =
            apply_encoding(table, &self.encoding)?.select_columns(&self.feature_names())?;
        transform(&encoded, self)
    }
}
