//! Labeled tabular data: CSV ingestion, min-max scaling, and column partitioning
//! into per-branch inputs.

use std::collections::HashMap;
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub features: Matrix,
    /// Dense class index per row.
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    /// Class names in first-appearance order.
    pub class_names: Vec<String>,
}

impl TabularDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::dim(format!(
                "{} labels for {} rows",
                labels.len(),
                features.rows()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(Error::dim(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.cols()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::config(format!(
                "label index {bad} has no class name ({} classes)",
                class_names.len()
            )));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("dataset features".into()));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            class_names,
        })
    }

    /// Maps string labels to dense indices in first-appearance order.
    pub fn from_label_strings<S: AsRef<str>>(
        features: Matrix,
        labels: &[S],
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let mut class_names = Vec::new();
        let mut lookup = HashMap::new();
        let indices = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                *lookup.entry(l.to_string()).or_insert_with(|| {
                    class_names.push(l.to_string());
                    class_names.len() - 1
                })
            })
            .collect();
        Self::new(features, indices, feature_names, class_names)
    }

    pub fn n_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    /// Re-indexes labels so that `reference` classes come first, in that order;
    /// classes unknown to `reference` follow in their current order.
    pub fn align_classes(&mut self, reference: &[String]) {
        let mut names: Vec<String> = reference.to_vec();
        for c in &self.class_names {
            if !names.contains(c) {
                names.push(c.clone());
            }
        }
        let remap: Vec<usize> = self
            .class_names
            .iter()
            .map(|c| {
                names
                    .iter()
                    .position(|n| n == c)
                    .expect("name was inserted above")
            })
            .collect();
        for l in &mut self.labels {
            *l = remap[*l];
        }
        self.class_names = names;
    }

    pub fn with_features(&self, features: Matrix, feature_names: Vec<String>) -> Result<Self> {
        Self::new(
            features,
            self.labels.clone(),
            feature_names,
            self.class_names.clone(),
        )
    }

    /// Reads a headered CSV. Every column except `label_column` must be numeric.
    pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Self> {
        let path = path.as_ref();
        let ingest = |row: usize, column: &str, message: String| Error::Ingestion {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            message,
        };

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(ingest(1, "", "file is empty or has no header".into()));
        }
        let label_idx = headers
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| ingest(1, label_column, "label column not found in header".into()))?;
        let feature_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != label_idx).collect();
        let feature_names = feature_cols
            .iter()
            .map(|&i| headers[i].to_string())
            .collect();

        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (k, record) in reader.records().enumerate() {
            let line = k + 2;
            let record = record?;
            if record.len() != headers.len() {
                return Err(ingest(
                    line,
                    "",
                    format!("expected {} fields, found {}", headers.len(), record.len()),
                ));
            }
            for &c in &feature_cols {
                let cell = &record[c];
                let v: f64 = cell
                    .parse()
                    .map_err(|_| ingest(line, &headers[c], format!("'{cell}' is not a number")))?;
                if !v.is_finite() {
                    return Err(ingest(line, &headers[c], format!("'{cell}' is not finite")));
                }
                values.push(v);
            }
            labels.push(record[label_idx].to_string());
        }
        if labels.is_empty() {
            return Err(ingest(2, "", "file has no data rows".into()));
        }
        let features = Matrix::from_vec(labels.len(), feature_cols.len(), values)?;
        Self::from_label_strings(features, &labels, feature_names)
    }

    /// Writes features followed by a label column. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn write_csv(&self, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(label_column);
        w.write_record(&header)?;
        for (r, row) in self.features.iter_rows().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(self.class_names[self.labels[r]].clone());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-feature minimum and maximum of a fitting set.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationStats {
    pub fn fit(features: &Matrix) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::EmptyInput(
                "cannot fit min-max statistics on zero rows".into(),
            ));
        }
        let mut min = features.row(0).to_vec();
        let mut max = min.clone();
        for row in features.iter_rows().skip(1) {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    /// `(v - min) / (max - min)` clamped to `[0, 1]`; constant columns map to 0.
    pub fn apply(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.width() {
            return Err(Error::dim(format!(
                "data has {} columns, normalization was fitted on {}",
                features.cols(),
                self.width()
            )));
        }
        let mut out = features.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                let span = self.max[j] - self.min[j];
                *v = if span > 0.0 {
                    ((*v - self.min[j]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }
}

pub fn fit_minmax(train: &TabularDataset) -> Result<NormalizationStats> {
    NormalizationStats::fit(&train.features)
}

pub fn apply_minmax(ds: &TabularDataset, stats: &NormalizationStats) -> Result<TabularDataset> {
    let features = stats.apply(&ds.features)?;
    ds.with_features(features, ds.feature_names.clone())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionSpec {
    /// Explicit branch widths, assigned to columns in order.
    Widths(Vec<usize>),
    /// `n` branches of near-equal width; earlier branches take the remainder.
    Equal(usize),
}

/// Contiguous column ranges, one per branch, covering all columns in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchPartition {
    ranges: Vec<Range<usize>>,
}

impl BranchPartition {
    pub fn new(spec: &PartitionSpec, total: usize) -> Result<Self> {
        let widths = match spec {
            PartitionSpec::Widths(w) => {
                if w.is_empty() || w.contains(&0) {
                    return Err(Error::config(format!(
                        "branch widths must be positive, got {w:?}"
                    )));
                }
                let sum: usize = w.iter().sum();
                if sum != total {
                    return Err(Error::config(format!(
                        "branch widths {w:?} sum to {sum}, dataset has {total} features"
                    )));
                }
                w.clone()
            }
            &PartitionSpec::Equal(n) => {
                if n == 0 || n > total {
                    return Err(Error::config(format!(
                        "cannot split {total} features into {n} branches"
                    )));
                }
                let (base, extra) = (total / n, total % n);
                (0..n).map(|j| base + usize::from(j < extra)).collect()
            }
        };
        Ok(Self::from_widths(&widths))
    }

    pub fn from_widths(widths: &[usize]) -> Self {
        let mut start = 0;
        let ranges = widths
            .iter()
            .map(|&w| {
                let r = start..start + w;
                start += w;
                r
            })
            .collect();
        Self { ranges }
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn widths(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    pub fn n_branches(&self) -> usize {
        self.ranges.len()
    }

    pub fn total_width(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn split(&self, features: &Matrix) -> Result<BranchView> {
        if features.cols() != self.total_width() {
            return Err(Error::dim(format!(
                "data has {} columns, partition covers {}",
                features.cols(),
                self.total_width()
            )));
        }
        let branches = self
            .ranges
            .iter()
            .map(|r| features.column_block(r.start, r.len()))
            .collect();
        Ok(BranchView { branches })
    }
}

/// Per-branch feature blocks sharing the source row order.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchView {
    pub branches: Vec<Matrix>,
}

impl BranchView {
    pub fn n_rows(&self) -> usize {
        self.branches.first().map_or(0, Matrix::rows)
    }

    pub fn widths(&self) -> Vec<usize> {
        self.branches.iter().map(Matrix::cols).collect()
    }

    /// Column-wise concatenation `x = x⁽¹⁾ ⊕ … ⊕ x⁽ⁿ⁾`.
    pub fn concat(&self) -> Result<Matrix> {
        Matrix::hconcat(&self.branches)
    }

    pub fn select_rows(&self, rows: &[usize]) -> BranchView {
        BranchView {
            branches: self.branches.iter().map(|b| b.select_rows(rows)).collect(),
        }
    }
}

pub fn partition_features(
    ds: &TabularDataset,
    spec: &PartitionSpec,
) -> Result<(BranchPartition, BranchView)> {
    let partition = BranchPartition::new(spec, ds.n_features())?;
    let view = partition.split(&ds.features)?;
    Ok((partition, view))
}
