//! Datasets, score vectors and AUC matrices, plus the CSV/JSON interchange
//! formats used to move them between runs.
//!
//! Dataset CSV: a header row, one column per feature, and an optional final
//! column named `label` holding 0 (normal) or 1 (anomaly). Numbers are written
//! in Rust's shortest round-trip form, so re-ingesting a written file yields
//! bit-identical features.

use std::fs::File;
use std::io::{BufReader, Write};
use std::ops::Deref;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the optional label column in the dataset CSV format.
pub const LABEL_COLUMN: &str = "label";

/// A dataset as it comes out of ingestion, before any checks.
#[derive(Debug, Clone, Default)]
pub struct RawDataset {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<f64>>,
    pub invert_labels: bool,
    pub exclude: bool,
}

/// A validated dataset: `n x d` finite features and optional 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub columns: Vec<String>,
    pub features: Array2<f64>,
    pub labels: Option<Vec<u8>>,
    pub invert_labels: bool,
    pub exclude: bool,
}

impl Dataset {
    /// Builds and validates a dataset from an in-memory matrix.
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let raw = RawDataset {
            name: name.into(),
            columns: (0..features.ncols()).map(|j| format!("x{j}")).collect(),
            rows: features.rows().into_iter().map(|r| r.to_vec()).collect(),
            labels: labels.map(|l| l.into_iter().map(f64::from).collect()),
            invert_labels: false,
            exclude: false,
        };
        validate_dataset(raw)
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn anomaly_count(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().filter(|&&y| y == 1).count())
    }

    /// Labels as required by evaluation; fails if the dataset is unlabeled.
    pub fn require_labels(&self) -> Result<&[u8]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::MissingLabels(self.name.clone()))
    }

    /// Returns a copy with every label `y` replaced by `1 - y`.
    pub fn with_inverted_labels(&self) -> Self {
        let mut out = self.clone();
        if let Some(labels) = out.labels.as_mut() {
            labels.iter_mut().for_each(|y| *y = 1 - *y);
        }
        out
    }
}

/// Checks the dataset invariants and normalizes labels to `{0,1}`.
pub fn validate_dataset(raw: RawDataset) -> Result<Dataset> {
    let n = raw.rows.len();
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: n,
        });
    }
    let d = raw.rows[0].len();
    if d == 0 {
        return Err(Error::NoFeatures);
    }
    let mut features = Array2::zeros((n, d));
    for (i, row) in raw.rows.iter().enumerate() {
        if row.len() != d {
            return Err(Error::Ragged {
                row: i,
                expected: d,
                found: row.len(),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            features[[i, j]] = v;
        }
    }

    let labels = match raw.labels {
        None => None,
        Some(values) => {
            if values.len() != n {
                return Err(Error::LabelLength {
                    samples: n,
                    labels: values.len(),
                });
            }
            let mut labels = Vec::with_capacity(n);
            for (row, &value) in values.iter().enumerate() {
                labels.push(match value {
                    0.0 => 0u8,
                    1.0 => 1u8,
                    _ => return Err(Error::InvalidLabel { row, value }),
                });
            }
            if !labels.contains(&0) {
                return Err(Error::NoNormalSamples);
            }
            Some(labels)
        }
    };

    let columns = if raw.columns.len() == d {
        raw.columns
    } else {
        (0..d).map(|j| format!("x{j}")).collect()
    };

    Ok(Dataset {
        name: raw.name,
        columns,
        features,
        labels,
        invert_labels: raw.invert_labels,
        exclude: raw.exclude,
    })
}

/// Per-sample anomaly scores; higher means more anomalous.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScore(i));
        }
        Ok(ScoreVector(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Grid-averaged AUC per (algorithm, dataset); rows are algorithms.
#[derive(Debug, Clone, PartialEq)]
pub struct AucMatrix {
    pub algorithms: Vec<String>,
    pub datasets: Vec<String>,
    pub values: Array2<f64>,
}

impl AucMatrix {
    pub fn new(
        algorithms: Vec<String>,
        datasets: Vec<String>,
        values: Array2<f64>,
    ) -> Result<Self> {
        if values.dim() != (algorithms.len(), datasets.len()) {
            return Err(Error::InvalidParameter(format!(
                "AUC matrix shape {:?} does not match {} algorithms x {} datasets",
                values.dim(),
                algorithms.len(),
                datasets.len()
            )));
        }
        for ((a, d), &v) in values.indexed_iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(if v.is_nan() {
                    Error::IncompleteMatrix {
                        algorithm: algorithms[a].clone(),
                        dataset: datasets[d].clone(),
                    }
                } else {
                    Error::InvalidParameter(format!(
                        "AUC {v} outside [0,1] for ({}, {})",
                        algorithms[a], datasets[d]
                    ))
                });
            }
        }
        Ok(AucMatrix {
            algorithms,
            datasets,
            values,
        })
    }

    pub fn n_algorithms(&self) -> usize {
        self.algorithms.len()
    }

    pub fn n_datasets(&self) -> usize {
        self.datasets.len()
    }

    pub fn algorithm_index(&self, name: &str) -> Option<usize> {
        self.algorithms.iter().position(|a| a == name)
    }

    pub fn dataset_index(&self, name: &str) -> Option<usize> {
        self.datasets.iter().position(|d| d == name)
    }

    /// Mean AUC of each algorithm across datasets.
    pub fn mean_auc(&self) -> Vec<f64> {
        self.values
            .rows()
            .into_iter()
            .map(|r| r.sum() / r.len() as f64)
            .collect()
    }

    /// Keeps only the named dataset columns, in the given order.
    pub fn select_datasets(&self, names: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.dataset_index(n)
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown dataset `{n}`")))
            })
            .collect::<Result<_>>()?;
        let values = self.values.select(ndarray::Axis(1), &idx);
        AucMatrix::new(
            self.algorithms.clone(),
            names.iter().map(|s| s.to_string()).collect(),
            values,
        )
    }

    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let datasets: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut algorithms = Vec::new();
        let mut flat = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != datasets.len() + 1 {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    message: format!("row {} has {} fields", algorithms.len() + 1, record.len()),
                });
            }
            algorithms.push(record[0].to_string());
            for field in record.iter().skip(1) {
                flat.push(parse_number(field, origin)?);
            }
        }
        let values =
            Array2::from_shape_vec((algorithms.len(), datasets.len()), flat).map_err(|e| {
                Error::Parse {
                    path: origin.to_path_buf(),
                    message: e.to_string(),
                }
            })?;
        AucMatrix::new(algorithms, datasets, values)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    /// Writes the matrix with a fixed number of decimals (6 for run output).
    pub fn to_csv_string(&self, decimals: usize) -> String {
        let mut out = String::from("algorithm");
        for d in &self.datasets {
            out.push(',');
            out.push_str(d);
        }
        out.push('\n');
        for (a, row) in self.algorithms.iter().zip(self.values.rows()) {
            out.push_str(a);
            for v in row {
                out.push_str(&format!(",{v:.decimals$}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path, decimals: usize) -> Result<()> {
        std::fs::write(path, self.to_csv_string(decimals)).map_err(|e| Error::io(path, e))
    }
}

fn parse_number(field: &str, origin: &Path) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Parse {
        path: origin.to_path_buf(),
        message: format!("not a number: `{field}`"),
    })
}

/// Reads a dataset in the CSV interchange format.
pub fn read_dataset_csv(path: &Path, name: &str) -> Result<RawDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers = reader.headers()?.clone();
    let has_label = headers.iter().next_back() == Some(LABEL_COLUMN);
    let n_features = headers.len() - usize::from(has_label);
    let columns = headers
        .iter()
        .take(n_features)
        .map(str::to_string)
        .collect();

    let mut rows = Vec::new();
    let mut labels = has_label.then(Vec::new);
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Ragged {
                row: i,
                expected: headers.len(),
                found: record.len(),
            });
        }
        let row = record
            .iter()
            .take(n_features)
            .map(|f| parse_number(f, path))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
        if let Some(labels) = labels.as_mut() {
            labels.push(parse_number(&record[n_features], path)?);
        }
    }
    Ok(RawDataset {
        name: name.to_string(),
        columns,
        rows,
        labels,
        invert_labels: false,
        exclude: false,
    })
}

pub fn write_dataset_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(dataset_to_csv_string(dataset).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn dataset_to_csv_string(dataset: &Dataset) -> String {
    let mut out = dataset.columns.join(",");
    if dataset.labels.is_some() {
        out.push(',');
        out.push_str(LABEL_COLUMN);
    }
    out.push('\n');
    for (i, row) in dataset.features.rows().into_iter().enumerate() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&fields.join(","));
        if let Some(labels) = &dataset.labels {
            out.push_str(&format!(",{}", labels[i]));
        }
        out.push('\n');
    }
    out
}

/// One entry of a JSON dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub invert_labels: bool,
    #[serde(default)]
    pub exclude: bool,
}

/// Reads a manifest; relative paths are resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for entry in &mut entries {
        if entry.path.is_relative() {
            entry.path = base.join(&entry.path);
        }
    }
    Ok(entries)
}
