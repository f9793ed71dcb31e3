use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at ({row},{col})")]
    NonFinite { row: usize, col: usize },

    #[error("label outside {{0,1}} at row {row}: {value}")]
    InvalidLabel { row: usize, value: f64 },

    #[error("ragged rows: row {row} has {found} columns, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("dataset needs at least {required} samples, got {found}")]
    TooFewSamples { required: usize, found: usize },

    #[error("labels must contain at least one normal (0) sample")]
    NoNormalSamples,

    #[error("labels must contain both classes")]
    SingleClass,

    #[error("label vector has length {labels}, expected {samples}")]
    LabelLength { samples: usize, labels: usize },

    #[error("non-finite score at sample {0}")]
    NonFiniteScore(usize),

    #[error("no informative variables")]
    NoInformativeVariables,

    #[error("dataset has no features")]
    NoFeatures,

    #[error("k = {k} out of range for n = {n} samples")]
    KOutOfRange { k: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("EM diverged: non-finite likelihood in component {component}")]
    EmDiverged { component: usize },

    #[error("labels required for evaluation of dataset `{0}`")]
    MissingLabels(String),

    #[error("incomplete AUC matrix: missing entry for ({algorithm}, {dataset})")]
    IncompleteMatrix { algorithm: String, dataset: String },

    #[error("statistic saturated: chi-square equals N(k-1), denominator is zero")]
    StatisticSaturated,

    #[error("zero-variance row {0}")]
    ZeroVariance(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{algorithm} failed on `{dataset}` at grid point {params}: {source}")]
    GridPoint {
        algorithm: String,
        dataset: String,
        params: String,
        #[source]
        source: Box<Error>,
    },

    #[error("manifest entry `{name}`: {source}")]
    ManifestEntry {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
