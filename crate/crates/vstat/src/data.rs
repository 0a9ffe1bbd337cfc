//! Training data container and CSV ingestion.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// An i.i.d. training sample: n rows of p covariates plus a response vector.
/// For classification the targets are class labels encoded as consecutive
/// integers starting from 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>, // row-major, n * p
    targets: Vec<f64>,
    n: usize,
    p: usize,
    task: Task,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<f64>, task: Task) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::data("dataset must have at least one row"));
        }
        if targets.len() != n {
            return Err(Error::data(format!(
                "feature row count {} does not match target length {}",
                n,
                targets.len()
            )));
        }
        let p = features[0].len();
        if p == 0 {
            return Err(Error::data("dataset must have at least one feature"));
        }
        let mut flat = Vec::with_capacity(n * p);
        for (i, row) in features.iter().enumerate() {
            if row.len() != p {
                return Err(Error::data(format!(
                    "row {} has {} features, expected {}",
                    i,
                    row.len(),
                    p
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::data(format!("non-finite feature value in row {i}")));
                }
                flat.push(v);
            }
        }
        for (i, &y) in targets.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::data(format!("non-finite target value in row {i}")));
            }
            if task == Task::Classification && (y < 0.0 || y.fract() != 0.0) {
                return Err(Error::data(format!(
                    "classification target in row {i} is not a non-negative integer"
                )));
            }
        }
        Ok(Dataset {
            features: flat,
            targets,
            n,
            p,
            task,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Number of classes, from the largest label present.
    pub fn n_classes(&self) -> usize {
        match self.task {
            Task::Regression => 0,
            Task::Classification => self
                .targets
                .iter()
                .fold(0usize, |acc, &y| acc.max(y as usize + 1)),
        }
    }

    /// Read a dataset from CSV: header row, feature columns plus one target
    /// column named "y". UTF-8, decimal point, no missing values.
    pub fn from_csv(path: impl AsRef<Path>, task: Task) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path.as_ref())
            .map_err(|e| Error::data(format!("cannot open {}: {e}", path.as_ref().display())))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::data(format!("cannot read header: {e}")))?
            .clone();
        let y_col = headers
            .iter()
            .position(|h| h == "y")
            .ok_or_else(|| Error::data("no column named \"y\" in header"))?;

        let mut features = Vec::new();
        let mut targets = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let line = idx + 2; // 1-based, after the header
            let record = record.map_err(|e| Error::data(format!("line {line}: {e}")))?;
            if record.len() != headers.len() {
                return Err(Error::data(format!(
                    "line {line}: expected {} fields, found {}",
                    headers.len(),
                    record.len()
                )));
            }
            let mut row = Vec::with_capacity(headers.len() - 1);
            for (col, field) in record.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::data(format!("line {line}: cannot parse \"{field}\"")))?;
                if col == y_col {
                    targets.push(v);
                } else {
                    row.push(v);
                }
            }
            features.push(row);
        }
        Dataset::new(features, targets, task)
    }
}
