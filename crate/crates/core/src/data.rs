//! The uniform interchange format: a row-major dense feature matrix with a
//! binary label vector. Every trainer receives data in this shape and
//! converts it at its own boundary.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset must have at least one row and one feature column")]
    Empty,
    #[error("feature buffer holds {got} values, expected {rows} x {cols}")]
    Shape { rows: usize, cols: usize, got: usize },
    #[error("{names} column names given for {cols} feature columns")]
    ColumnNames { names: usize, cols: usize },
    #[error("label vector has {labels} entries for {rows} rows")]
    LabelLength { labels: usize, rows: usize },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("label at row {row} is {value}, expected 0 or 1")]
    Label { row: usize, value: String },
    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowLength { row: usize, expected: usize, found: usize },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a real")]
    Parse { row: usize, column: String, value: String },
    #[error("sampling rate {0} outside (0, 1]")]
    Rate(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Dense row-major dataset with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Vec<T>,
    labels: Vec<T>,
    column_names: Vec<String>,
    n_rows: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: Vec<T>,
        labels: Vec<T>,
        column_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let n_rows = labels.len();
        let n_cols = column_names.len();
        if n_rows == 0 || n_cols == 0 {
            return Err(DataError::Empty);
        }
        if features.len() != n_rows * n_cols {
            return Err(DataError::Shape {
                rows: n_rows,
                cols: n_cols,
                got: features.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                row: pos / n_cols,
                col: pos % n_cols,
            });
        }
        if let Some((row, v)) = labels
            .iter()
            .enumerate()
            .find(|(_, &v)| v != T::zero() && v != T::one())
        {
            return Err(DataError::Label {
                row,
                value: v.to_string(),
            });
        }
        Ok(Self {
            features,
            labels,
            column_names,
            n_rows,
        })
    }

    /// Builds a dataset from row vectors, naming columns `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<T>], labels: Vec<T>) -> Result<Self, DataError> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
            return Err(DataError::RowLength {
                row,
                expected: n_cols,
                found: r.len(),
            });
        }
        if rows.len() != labels.len() {
            return Err(DataError::LabelLength {
                labels: labels.len(),
                rows: rows.len(),
            });
        }
        let names = (0..n_cols).map(|j| format!("x{j}")).collect();
        Self::new(rows.concat(), labels, names)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn labels(&self) -> &[T] {
        &self.labels
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.n_cols();
        &self.features[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.features.chunks_exact(self.n_cols())
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.features[row * self.n_cols() + col]
    }

    /// Count of rows labelled 1.
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == T::one()).count()
    }

    /// Copies the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut features = Vec::with_capacity(rows.len() * self.n_cols());
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            features.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Self {
            features,
            labels,
            column_names: self.column_names.clone(),
            n_rows: rows.len(),
        }
    }

    /// Uniform sample without replacement of `max(1, floor(rate * n_rows))`
    /// rows. Selected rows keep their original relative order, so `rate = 1`
    /// returns an identical dataset.
    pub fn sample(&self, rate: f64, seed: u64) -> Result<Self, DataError> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(DataError::Rate(rate));
        }
        let k = ((rate * self.n_rows as f64).floor() as usize).clamp(1, self.n_rows);
        if k == self.n_rows {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = index::sample(&mut rng, self.n_rows, k).into_vec();
        picked.sort_unstable();
        Ok(self.select_rows(&picked))
    }

    /// Zero-mean, unit-variance columns (population convention). Constant
    /// columns become all zero.
    pub fn standardize(&self) -> Self {
        ColumnStats::fit(self).apply(self)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, label_column: &str) -> Result<Self, DataError> {
        Self::from_csv_reader(File::open(path)?, label_column)
    }

    /// Reads a headered, comma-separated file. Features are every non-label
    /// column in header order.
    pub fn from_csv_reader<R: Read>(reader: R, label_column: &str) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let label_idx = header
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| DataError::MissingLabelColumn(label_column.to_owned()))?;
        let column_names: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != label_idx)
            .map(|(_, h)| h.clone())
            .collect();

        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != header.len() {
                return Err(DataError::RowLength {
                    row,
                    expected: header.len(),
                    found: record.len(),
                });
            }
            for (j, cell) in record.iter().enumerate() {
                let value: T = cell.parse().map_err(|_| DataError::Parse {
                    row,
                    column: header[j].clone(),
                    value: cell.to_owned(),
                })?;
                if !value.is_finite() {
                    return Err(DataError::NonFinite { row, col: j });
                }
                if j == label_idx {
                    labels.push(value);
                } else {
                    features.push(value);
                }
            }
        }
        Self::new(features, labels, column_names)
    }

    pub fn to_csv_path(&self, path: impl AsRef<Path>, label_column: &str) -> Result<(), DataError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w, label_column)?;
        w.flush()?;
        Ok(())
    }

    /// Writes features in column order followed by the label as the last
    /// column. Values use the shortest representation that reads back
    /// exactly.
    pub fn write_csv<W: Write>(&self, w: W, label_column: &str) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.column_names.iter().map(String::as_str).collect();
        header.push(label_column);
        wtr.write_record(&header)?;
        let mut fields = Vec::with_capacity(self.n_cols() + 1);
        for (i, row) in self.rows().enumerate() {
            fields.clear();
            fields.extend(row.iter().map(|v| v.to_string()));
            fields.push(self.labels[i].to_string());
            wtr.write_record(&fields)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats<T> {
    pub means: Vec<T>,
    pub std_devs: Vec<T>,
}

impl<T: Scalar> ColumnStats<T> {
    pub fn fit(ds: &Dataset<T>) -> Self {
        let n = T::from_usize_lossy(ds.n_rows());
        let cols = ds.n_cols();
        let mut means = vec![T::zero(); cols];
        for row in ds.rows() {
            for (m, &v) in means.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        means.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); cols];
        for row in ds.rows() {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&means) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let std_devs = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Self { means, std_devs }
    }

    /// Applies `(x - mean) / sd`; columns with zero spread map to zero.
    pub fn apply(&self, ds: &Dataset<T>) -> Dataset<T> {
        let cols = ds.n_cols();
        let features = ds
            .features()
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let j = k % cols;
                let sd = self.std_devs[j];
                if sd > T::zero() {
                    (v - self.means[j]) / sd
                } else {
                    T::zero()
                }
            })
            .collect();
        Dataset {
            features,
            labels: ds.labels.clone(),
            column_names: ds.column_names.clone(),
            n_rows: ds.n_rows,
        }
    }
}
