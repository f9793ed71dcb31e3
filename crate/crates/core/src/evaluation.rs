//! ROC-AUC, grid averaging, percent-of-max normalization, dataset
//! diagnostics and boxplot summaries.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AucMatrix, Dataset};
use crate::detectors::{Algorithm, DetectorSpec, Params, Workspace};
use crate::error::{Error, Result};
use crate::numeric::{average_ranks, compensated_sum, quantile_sorted};
use crate::seed::derive_seed;

/// Mann-Whitney AUC: the probability that a random anomaly outscores a random
/// normal sample, ties counted half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LabelLength {
            samples: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore(i));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(r, _)| r)
        .sum();
    let u = rank_sum - (positives * (positives + 1)) as f64 / 2.0;
    Ok(u / (positives as f64 * negatives as f64))
}

/// AUCs of one algorithm over its grid on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub algorithm: String,
    pub dataset: String,
    pub params: Vec<Params>,
    /// One AUC per grid point; for randomized detectors, the mean over repeats.
    pub aucs: Vec<f64>,
    pub mean_auc: f64,
}

impl GridResult {
    pub fn new(
        algorithm: &str,
        dataset: &str,
        params: Vec<Params>,
        aucs: Vec<f64>,
    ) -> Result<Self> {
        if aucs.is_empty() {
            return Err(Error::Empty("grid"));
        }
        let mean_auc = grid_mean(&aucs);
        Ok(GridResult {
            algorithm: algorithm.to_string(),
            dataset: dataset.to_string(),
            params,
            aucs,
            mean_auc,
        })
    }
}

/// Arithmetic mean with compensated summation.
pub fn grid_mean(aucs: &[f64]) -> f64 {
    compensated_sum(aucs.iter().copied()) / aucs.len() as f64
}

/// Seed of one repeat of one grid point, independent of scheduling.
pub fn task_seed(
    master: u64,
    algorithm: Algorithm,
    dataset: &str,
    params: &Params,
    repeat: usize,
) -> u64 {
    derive_seed(
        master,
        &[
            algorithm.name(),
            dataset,
            &params.to_string(),
            &repeat.to_string(),
        ],
    )
}

/// AUC of one grid point on one dataset, averaged over `repeats` seeds for
/// randomized detectors.
pub fn grid_point_auc(
    algorithm: Algorithm,
    params: &Params,
    dataset: &Dataset,
    ws: &Workspace<'_>,
    master_seed: u64,
    repeats: usize,
) -> Result<f64> {
    let labels = dataset.require_labels()?;
    let spec = DetectorSpec::custom(algorithm, params.clone());
    let repeats = if algorithm.is_randomized() {
        repeats.max(1)
    } else {
        1
    };
    let aucs = (0..repeats)
        .map(|r| {
            let seed = task_seed(master_seed, algorithm, &dataset.name, params, r);
            let scores = spec.score_in(ws, seed)?;
            roc_auc(&scores, labels)
        })
        .collect::<Result<Vec<f64>>>()
        .map_err(|e| Error::GridPoint {
            algorithm: algorithm.name().to_string(),
            dataset: dataset.name.clone(),
            params: params.to_string(),
            source: Box::new(e),
        })?;
    Ok(grid_mean(&aucs))
}

/// Evaluates every grid point on the full dataset and averages the AUCs.
pub fn grid_average(
    algorithm: Algorithm,
    dataset: &Dataset,
    master_seed: u64,
    repeats: usize,
) -> Result<GridResult> {
    let ws = Workspace::new(&dataset.features);
    grid_average_in(algorithm, dataset, &ws, master_seed, repeats)
}

pub fn grid_average_in(
    algorithm: Algorithm,
    dataset: &Dataset,
    ws: &Workspace<'_>,
    master_seed: u64,
    repeats: usize,
) -> Result<GridResult> {
    let grid = algorithm.grid();
    let aucs = grid
        .par_iter()
        .map(|p| grid_point_auc(algorithm, p, dataset, ws, master_seed, repeats))
        .collect::<Result<Vec<f64>>>()?;
    GridResult::new(algorithm.name(), &dataset.name, grid, aucs)
}

/// `100 * AUC / column maximum`.
pub fn percent_of_max(auc: &AucMatrix) -> Result<Array2<f64>> {
    let mut out = auc.values.clone();
    for (d, mut col) in out.columns_mut().into_iter().enumerate() {
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "dataset {} has no positive AUC",
                auc.datasets[d]
            )));
        }
        col.mapv_inplace(|v| v / max * 100.0);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Keep,
    Invert,
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDiagnosis {
    pub max_auc: f64,
    pub min_auc: f64,
    pub verdict: Verdict,
}

pub const CHANCE_BAND: (f64, f64) = (0.4, 0.6);

/// Exclude when every AUC lies in `[0.4, 0.6]`; invert when none exceeds 0.6
/// but some fall below 0.4; keep otherwise.
pub fn diagnose_dataset(aucs: &[f64]) -> Result<DatasetDiagnosis> {
    if aucs.is_empty() {
        return Err(Error::Empty("AUC column"));
    }
    let max_auc = aucs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_auc = aucs.iter().copied().fold(f64::INFINITY, f64::min);
    let (lo, hi) = CHANCE_BAND;
    let verdict = if min_auc >= lo && max_auc <= hi {
        Verdict::Exclude
    } else if max_auc <= hi && min_auc < lo {
        Verdict::Invert
    } else {
        Verdict::Keep
    };
    Ok(DatasetDiagnosis {
        max_auc,
        min_auc,
        verdict,
    })
}

/// Tukey boxplot summary with whiskers at the most extreme points within
/// 1.5 IQR of the quartiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub label: String,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub mean: f64,
    pub fliers: Vec<f64>,
}

pub fn boxplot_stats(label: &str, values: &[f64]) -> Result<BoxplotStats> {
    if values.is_empty() {
        return Err(Error::Empty("boxplot values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let reach = 1.5 * (q3 - q1);
    let (lo_fence, hi_fence) = (q1 - reach, q3 + reach);
    let inside: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|&v| v >= lo_fence && v <= hi_fence)
        .collect();
    let fliers = sorted
        .iter()
        .copied()
        .filter(|&v| v < lo_fence || v > hi_fence)
        .collect();
    Ok(BoxplotStats {
        label: label.to_string(),
        q1,
        median,
        q3,
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        mean: compensated_sum(values.iter().copied()) / values.len() as f64,
        fliers,
    })
}

/// One boxplot per algorithm over its percent-of-max row.
pub fn percent_of_max_boxplots(auc: &AucMatrix) -> Result<Vec<BoxplotStats>> {
    let pom = percent_of_max(auc)?;
    auc.algorithms
        .iter()
        .zip(pom.rows())
        .map(|(name, row)| boxplot_stats(name, &row.to_vec()))
        .collect()
}

pub fn boxplots_to_csv(stats: &[BoxplotStats]) -> String {
    let mut out = String::from("algorithm,mean,whisker_low,q1,median,q3,whisker_high,fliers\n");
    for s in stats {
        let fliers: Vec<String> = s.fliers.iter().map(|v| format!("{v:.6}")).collect();
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            s.label,
            s.mean,
            s.whisker_low,
            s.q1,
            s.median,
            s.q3,
            s.whisker_high,
            fliers.join(";")
        ));
    }
    out
}
