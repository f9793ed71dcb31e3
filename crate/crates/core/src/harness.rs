//! Benchmark orchestration: manifest loading, the (algorithm x dataset x grid
//! point) task sweep, diagnostics and result files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{read_dataset_csv, read_manifest, validate_dataset, AucMatrix, Dataset};
use crate::detectors::{Algorithm, Params, Workspace, INNE_SUBSAMPLE};
use crate::error::{Error, Result};
use crate::evaluation::{
    diagnose_dataset, grid_mean, grid_point_auc, DatasetDiagnosis, GridResult, Verdict,
};
use crate::preprocess::{preprocess, PreprocessReport};

pub const AUC_MATRIX_FILE: &str = "auc_matrix.csv";
pub const GRID_DETAIL_FILE: &str = "grid_detail.json";
pub const METADATA_FILE: &str = "run_metadata.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const GAPS_FILE: &str = "gaps.json";
pub const PREPROCESS_DIR: &str = "preprocess";

/// Decimals of `auc_matrix.csv`.
pub const AUC_DECIMALS: usize = 6;
pub const DEFAULT_REPEATS: usize = 5;

/// A dataset after validation and preprocessing.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub report: PreprocessReport,
}

/// Loads one CSV: validate, optionally invert labels, then dedupe and scale.
pub fn load_dataset(
    path: &Path,
    name: &str,
    invert_labels: bool,
    exclude: bool,
) -> Result<LoadedDataset> {
    let mut raw = read_dataset_csv(path, name)?;
    raw.invert_labels = invert_labels;
    raw.exclude = exclude;
    let mut dataset = validate_dataset(raw)?;
    if invert_labels {
        dataset = dataset.with_inverted_labels();
    }
    let (dataset, report) = preprocess(&dataset)?;
    Ok(LoadedDataset { dataset, report })
}

/// Loads every manifest entry. Without `keep_going` the first failing entry
/// aborts; otherwise failures are returned alongside the loaded datasets.
pub fn load_manifest(path: &Path, keep_going: bool) -> Result<(Vec<LoadedDataset>, Vec<Gap>)> {
    let entries = read_manifest(path)?;
    let mut loaded = Vec::new();
    let mut gaps = Vec::new();
    for entry in entries {
        match load_dataset(&entry.path, &entry.name, entry.invert_labels, entry.exclude) {
            Ok(ds) => loaded.push(ds),
            Err(e) => {
                let err = Error::ManifestEntry {
                    name: entry.name.clone(),
                    source: Box::new(e),
                };
                if !keep_going {
                    return Err(err);
                }
                gaps.push(Gap {
                    algorithm: None,
                    dataset: entry.name,
                    message: err.to_string(),
                });
            }
        }
    }
    Ok((loaded, gaps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub apply_diagnostics: bool,
    pub repeats: usize,
    pub keep_going: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidParameter(
                "repeat count must be at least 1".into(),
            ));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Empty("algorithm selection"));
        }
        Ok(())
    }
}

/// A task that produced no result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub algorithm: Option<String>,
    pub dataset: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub auc: AucMatrix,
    pub grid: Vec<GridResult>,
    pub diagnostics: BTreeMap<String, DatasetDiagnosis>,
    pub gaps: Vec<Gap>,
}

/// Grid results of the selected algorithms on one dataset; every grid point
/// of every algorithm is an independent parallel task.
pub fn evaluate_dataset(
    dataset: &Dataset,
    algorithms: &[Algorithm],
    seed: u64,
    repeats: usize,
) -> Vec<(Algorithm, Result<GridResult>)> {
    let ws = Workspace::new(&dataset.features);
    let tasks: Vec<(usize, Params)> = algorithms
        .iter()
        .enumerate()
        .flat_map(|(a, alg)| alg.grid().into_iter().map(move |p| (a, p)))
        .collect();
    let aucs: Vec<Result<f64>> = tasks
        .par_iter()
        .map(|(a, p)| grid_point_auc(algorithms[*a], p, dataset, &ws, seed, repeats))
        .collect();
    let mut per_algorithm: Vec<(Vec<Params>, Result<Vec<f64>>)> = algorithms
        .iter()
        .map(|_| (Vec::new(), Ok(Vec::new())))
        .collect();
    for ((a, p), auc) in tasks.into_iter().zip(aucs) {
        let (params, values) = &mut per_algorithm[a];
        params.push(p);
        match (values.as_mut(), auc) {
            (Ok(v), Ok(x)) => v.push(x),
            (Ok(_), Err(e)) => *values = Err(e),
            (Err(_), _) => {}
        }
    }
    algorithms
        .iter()
        .zip(per_algorithm)
        .map(|(alg, (params, values))| {
            (
                *alg,
                values.and_then(|v| GridResult::new(alg.name(), &dataset.name, params, v)),
            )
        })
        .collect()
}

/// Flips a grid result to the inverted labelling (`AUC -> 1 - AUC`).
fn invert(result: &GridResult) -> GridResult {
    let aucs: Vec<f64> = result.aucs.iter().map(|a| 1.0 - a).collect();
    GridResult {
        mean_auc: grid_mean(&aucs),
        aucs,
        ..result.clone()
    }
}

/// Runs the benchmark over already-loaded datasets (excluded ones are
/// skipped). Datasets with any failed task are left out of the matrix and
/// reported as gaps; without `keep_going` the first failure is returned.
pub fn run_on(datasets: &[LoadedDataset], config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let mut grid = Vec::new();
    let mut gaps = Vec::new();
    let mut diagnostics = BTreeMap::new();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for loaded in datasets.iter().filter(|l| !l.dataset.exclude) {
        let ds = &loaded.dataset;
        let results = evaluate_dataset(ds, &config.algorithms, config.seed, config.repeats);
        let mut ok = Vec::with_capacity(results.len());
        for (alg, r) in results {
            match r {
                Ok(g) => ok.push(g),
                Err(e) if config.keep_going => gaps.push(Gap {
                    algorithm: Some(alg.name().to_string()),
                    dataset: ds.name.clone(),
                    message: e.to_string(),
                }),
                Err(e) => return Err(e),
            }
        }
        if ok.len() < config.algorithms.len() {
            grid.extend(ok);
            continue;
        }
        let column: Vec<f64> = ok.iter().map(|g| g.mean_auc).collect();
        let diagnosis = diagnose_dataset(&column)?;
        let verdict = diagnosis.verdict;
        diagnostics.insert(ds.name.clone(), diagnosis);
        match (config.apply_diagnostics, verdict) {
            (true, Verdict::Exclude) => grid.extend(ok),
            (true, Verdict::Invert) => {
                let flipped: Vec<GridResult> = ok.iter().map(invert).collect();
                columns.push((
                    ds.name.clone(),
                    flipped.iter().map(|g| g.mean_auc).collect(),
                ));
                grid.extend(flipped);
            }
            _ => {
                columns.push((ds.name.clone(), column));
                grid.extend(ok);
            }
        }
    }
    let k = config.algorithms.len();
    let mut values = Array2::zeros((k, columns.len()));
    for (d, (_, col)) in columns.iter().enumerate() {
        for a in 0..k {
            values[[a, d]] = col[a];
        }
    }
    let auc = AucMatrix::new(
        config
            .algorithms
            .iter()
            .map(|a| a.name().to_string())
            .collect(),
        columns.into_iter().map(|(name, _)| name).collect(),
        values,
    )?;
    Ok(RunOutcome {
        auc,
        grid,
        diagnostics,
        gaps,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub seed: u64,
    pub repeats: usize,
    pub apply_diagnostics: bool,
    pub algorithms: Vec<String>,
    pub datasets: Vec<String>,
    pub excluded_by_manifest: Vec<String>,
    pub inverted_by_manifest: Vec<String>,
    pub settings: BTreeMap<String, String>,
}

/// Fixed choices that are not visible in the hyperparameter grids.
pub fn run_settings() -> BTreeMap<String, String> {
    [
        ("inne_subsample", INNE_SUBSAMPLE.to_string()),
        ("quartiles", "linear interpolation at p(n-1)".to_string()),
        (
            "copod_aggregation",
            "sum over features of max(skew tail, mean of left and right tails)".to_string(),
        ),
        (
            "ecod_aggregation",
            "max of left, right and skew-selected tail sums".to_string(),
        ),
        ("zero_skew_tail", "mean of left and right tails".to_string()),
        (
            "kde_score",
            "negative log of the leave-one-out density, evaluated in log space".to_string(),
        ),
        (
            "pca_components",
            "leading components, mean-centered covariance".to_string(),
        ),
        (
            "gmm",
            "full covariance, 1e-6 diagonal, k-means++ start, tol 1e-6, 200 iterations".to_string(),
        ),
        (
            "kmeans",
            "k-means++ start, one restart, 100 iterations".to_string(),
        ),
        (
            "randomized_repeats",
            "AUC averaged over repeats per grid point".to_string(),
        ),
        (
            "seed_derivation",
            "FNV-1a of (algorithm, dataset, params, repeat) mixed with the master seed".to_string(),
        ),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes all run artifacts into `out_dir`.
pub fn write_outputs(
    out_dir: &Path,
    datasets: &[LoadedDataset],
    config: &RunConfig,
    outcome: &RunOutcome,
) -> Result<()> {
    create_dir(out_dir)?;
    outcome
        .auc
        .write_csv(&out_dir.join(AUC_MATRIX_FILE), AUC_DECIMALS)?;
    write(
        &out_dir.join(GRID_DETAIL_FILE),
        &serde_json::to_string_pretty(&outcome.grid)?,
    )?;
    write(
        &out_dir.join(DIAGNOSTICS_FILE),
        &serde_json::to_string_pretty(&outcome.diagnostics)?,
    )?;
    write(
        &out_dir.join(GAPS_FILE),
        &serde_json::to_string_pretty(&outcome.gaps)?,
    )?;
    let pre_dir = out_dir.join(PREPROCESS_DIR);
    create_dir(&pre_dir)?;
    for l in datasets {
        write(
            &pre_dir.join(format!("{}.json", l.dataset.name)),
            &serde_json::to_string_pretty(&l.report)?,
        )?;
    }
    let metadata = RunMetadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        repeats: config.repeats,
        apply_diagnostics: config.apply_diagnostics,
        algorithms: outcome.auc.algorithms.clone(),
        datasets: outcome.auc.datasets.clone(),
        excluded_by_manifest: datasets
            .iter()
            .filter(|l| l.dataset.exclude)
            .map(|l| l.dataset.name.clone())
            .collect(),
        inverted_by_manifest: datasets
            .iter()
            .filter(|l| l.dataset.invert_labels)
            .map(|l| l.dataset.name.clone())
            .collect(),
        settings: run_settings(),
    };
    write(
        &out_dir.join(METADATA_FILE),
        &serde_json::to_string_pretty(&metadata)?,
    )
}

/// Loads the manifest, runs every task and writes the artifacts.
pub fn run_benchmark(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let (datasets, load_gaps) = load_manifest(&config.manifest, config.keep_going)?;
    let mut outcome = run_on(&datasets, config)?;
    outcome.gaps.splice(0..0, load_gaps);
    write_outputs(&config.out_dir, &datasets, config, &outcome)?;
    Ok(outcome)
}
