//! Duplicate removal followed by robust centering and scaling: each variable
//! has its median subtracted and is divided by its interquartile range.
//! Variables with zero IQR carry no information at this scale and are dropped.

use std::collections::HashSet;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::quantile_sorted;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub duplicates_removed: usize,
    /// Indices (into the input columns) of dropped zero-IQR columns.
    pub columns_dropped: Vec<usize>,
    /// Median of every input column.
    pub medians: Vec<f64>,
    /// IQR of every input column; strictly positive for retained columns.
    pub iqrs: Vec<f64>,
}

/// Removes exact duplicate rows, keeping the first occurrence.
///
/// Returns the deduplicated matrix, the number of removed rows and the
/// (strictly increasing) indices of the kept rows.
pub fn dedupe_rows(x: &Array2<f64>) -> (Array2<f64>, usize, Vec<usize>) {
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(x.nrows());
    let mut kept = Vec::with_capacity(x.nrows());
    for (i, row) in x.rows().into_iter().enumerate() {
        // +0.0 folds -0.0 into 0.0 so both spellings of zero compare equal
        let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
        if seen.insert(key) {
            kept.push(i);
        }
    }
    let out = x.select(Axis(0), &kept);
    (out, x.nrows() - kept.len(), kept)
}

/// Median-centers and IQR-scales every column, dropping zero-IQR columns.
///
/// `duplicates_removed` in the returned report is left at zero.
pub fn robust_scale(x: &Array2<f64>) -> Result<(Array2<f64>, PreprocessReport)> {
    let d = x.ncols();
    let mut medians = Vec::with_capacity(d);
    let mut iqrs = Vec::with_capacity(d);
    let mut retained = Vec::new();
    let mut dropped = Vec::new();
    for (j, col) in x.columns().into_iter().enumerate() {
        let mut sorted = col.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = quantile_sorted(&sorted, 0.5);
        let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        medians.push(median);
        iqrs.push(iqr);
        if iqr > 0.0 {
            retained.push(j);
        } else {
            dropped.push(j);
        }
    }
    if retained.is_empty() {
        return Err(Error::NoInformativeVariables);
    }
    // selecting columns yields column-major storage; detectors expect rows
    let mut out = x
        .select(Axis(1), &retained)
        .as_standard_layout()
        .into_owned();
    for (mut col, &j) in out.columns_mut().into_iter().zip(&retained) {
        col.mapv_inplace(|v| (v - medians[j]) / iqrs[j]);
    }
    Ok((
        out,
        PreprocessReport {
            duplicates_removed: 0,
            columns_dropped: dropped,
            medians,
            iqrs,
        },
    ))
}

/// Full preprocessing of a dataset: dedupe, then robust scaling.
pub fn preprocess(dataset: &Dataset) -> Result<(Dataset, PreprocessReport)> {
    let (deduped, removed, kept) = dedupe_rows(&dataset.features);
    if deduped.nrows() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: deduped.nrows(),
        });
    }
    let (scaled, mut report) = robust_scale(&deduped)?;
    report.duplicates_removed = removed;
    let columns = dataset
        .columns
        .iter()
        .enumerate()
        .filter(|(j, _)| !report.columns_dropped.contains(j))
        .map(|(_, c)| c.clone())
        .collect();
    let labels = dataset
        .labels
        .as_ref()
        .map(|l| kept.iter().map(|&i| l[i]).collect());
    Ok((
        Dataset {
            name: dataset.name.clone(),
            columns,
            features: scaled,
            labels,
            invert_labels: dataset.invert_labels,
            exclude: dataset.exclude,
        },
        report,
    ))
}
