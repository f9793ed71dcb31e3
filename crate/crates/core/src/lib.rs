//! Unsupervised anomaly detectors and the machinery to benchmark them:
//! robust preprocessing, grid-averaged ROC-AUC, rank statistics and
//! two-way clustering of result matrices.

pub mod clustermap;
pub mod data;
pub mod detectors;
pub mod error;
pub mod evaluation;
pub mod fixtures;
pub mod harness;
pub mod neighbors;
pub mod numeric;
pub mod preprocess;
pub mod rankstats;
pub mod report;
pub mod seed;
pub mod synth;

pub use data::{AucMatrix, Dataset, ManifestEntry, RawDataset, ScoreVector};
pub use detectors::{Algorithm, DetectorSpec, Params, Workspace};
pub use error::{Error, Result};
pub use evaluation::{roc_auc, DatasetDiagnosis, GridResult, Verdict};
pub use neighbors::{build_neighbor_table, NeighborTable};
pub use preprocess::{preprocess, PreprocessReport};
pub use rankstats::{FriedmanRanks, RankSummary};
pub use synth::{generate_archetype, Archetype, ArchetypeSpec};
