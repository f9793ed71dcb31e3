//! The detector library and its hyperparameter grids.
//!
//! Every detector is a pure function of the (preprocessed) feature matrix,
//! its parameters and, for randomized detectors, a seed. Scores are oriented
//! so that higher means more anomalous.

use std::fmt;
use std::sync::OnceLock;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::ScoreVector;
use crate::error::{Error, Result};
use crate::neighbors::{build_neighbor_table, NeighborTable};

pub mod cluster;
pub mod copula;
pub mod density;
pub mod histogram;
pub mod isolation;
pub mod proximity;

pub use cluster::{cblof_score, kmeans, ClusterSplit, KMeans};
pub use copula::{copod_score, ecod_score};
pub use density::{gmm_fit, gmm_score, kde_score, pca_score, GaussianMixture};
pub use histogram::{birge_rozenholc_bins, hbos_score, loda_score, Histogram, HistogramModel};
pub use isolation::{eif_score, if_score, inne_score, path_length_norm, IsolationParams};
pub use proximity::{
    abod_score, cof_score, ensemble_lof_score, knn_score, kthnn_score, lof_score, odin_score,
};

/// Neighbors per sample kept in the shared table; covers FastABOD's k = 60.
pub const SHARED_TABLE_K: usize = 60;

/// The in-scope algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    Abod,
    Cblof,
    Cof,
    Copod,
    Ecod,
    Eif,
    EnsembleLof,
    Gmm,
    Hbos,
    IForest,
    Inne,
    Kde,
    Knn,
    KthNn,
    Loda,
    Lof,
    Odin,
    Pca,
    UCblof,
}

impl Algorithm {
    pub const ALL: [Algorithm; 19] = [
        Algorithm::Abod,
        Algorithm::Cblof,
        Algorithm::Cof,
        Algorithm::Copod,
        Algorithm::Ecod,
        Algorithm::Eif,
        Algorithm::EnsembleLof,
        Algorithm::Gmm,
        Algorithm::Hbos,
        Algorithm::IForest,
        Algorithm::Inne,
        Algorithm::Kde,
        Algorithm::Knn,
        Algorithm::KthNn,
        Algorithm::Loda,
        Algorithm::Lof,
        Algorithm::Odin,
        Algorithm::Pca,
        Algorithm::UCblof,
    ];

    /// Display name, as used in result tables.
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Abod => "ABOD",
            Algorithm::Cblof => "CBLOF",
            Algorithm::Cof => "COF",
            Algorithm::Copod => "COPOD",
            Algorithm::Ecod => "ECOD",
            Algorithm::Eif => "EIF",
            Algorithm::EnsembleLof => "ensemble-LOF",
            Algorithm::Gmm => "GMM",
            Algorithm::Hbos => "HBOS",
            Algorithm::IForest => "IF",
            Algorithm::Inne => "INNE",
            Algorithm::Kde => "KDE",
            Algorithm::Knn => "kNN",
            Algorithm::KthNn => "kth-NN",
            Algorithm::Loda => "LODA",
            Algorithm::Lof => "LOF",
            Algorithm::Odin => "ODIN",
            Algorithm::Pca => "PCA",
            Algorithm::UCblof => "u-CBLOF",
        }
    }

    /// Case-insensitive lookup by display name.
    pub fn from_name(name: &str) -> Option<Algorithm> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(name.trim()))
    }

    /// Whether the detector consumes a seed.
    pub fn is_randomized(self) -> bool {
        matches!(
            self,
            Algorithm::Cblof
                | Algorithm::UCblof
                | Algorithm::Eif
                | Algorithm::IForest
                | Algorithm::Inne
                | Algorithm::Loda
                | Algorithm::Gmm
        )
    }

    /// The full hyperparameter grid.
    pub fn grid(self) -> Vec<Params> {
        let k_5_to_30 = || (5..=30).map(|k| Params::K { k }).collect();
        match self {
            Algorithm::Abod => vec![Params::K { k: 60 }],
            Algorithm::Cblof | Algorithm::UCblof => {
                let mut grid = Vec::with_capacity(13 * 9);
                for k in 2..=14 {
                    for alpha in CBLOF_ALPHAS {
                        for beta in CBLOF_BETAS {
                            grid.push(Params::Cblof { k, alpha, beta });
                        }
                    }
                }
                grid
            }
            Algorithm::Cof => (5..=30).step_by(5).map(|k| Params::K { k }).collect(),
            Algorithm::Copod | Algorithm::Ecod | Algorithm::Hbos | Algorithm::Kde => {
                vec![Params::None]
            }
            Algorithm::Eif => {
                let mut grid = Vec::with_capacity(12);
                for subsample in ISOLATION_SUBSAMPLES {
                    for extension_level in 1..=3 {
                        grid.push(Params::Extended {
                            n_trees: ISOLATION_TREES,
                            subsample,
                            extension_level,
                        });
                    }
                }
                grid
            }
            Algorithm::EnsembleLof => vec![Params::KGrid {
                ks: (5..=30).collect(),
            }],
            Algorithm::Gmm => (1..=15)
                .map(|n_components| Params::Gmm { n_components })
                .collect(),
            Algorithm::IForest => ISOLATION_SUBSAMPLES
                .into_iter()
                .map(|subsample| Params::Isolation {
                    n_trees: ISOLATION_TREES,
                    subsample,
                })
                .collect(),
            Algorithm::Inne => vec![Params::Inne {
                n_estimators: INNE_ESTIMATORS,
                subsample: INNE_SUBSAMPLE,
            }],
            Algorithm::Knn | Algorithm::KthNn | Algorithm::Lof | Algorithm::Odin => k_5_to_30(),
            Algorithm::Loda => vec![Params::Loda {
                n_projections: LODA_PROJECTIONS,
            }],
            Algorithm::Pca => PCA_THRESHOLDS
                .into_iter()
                .map(|variance_threshold| Params::Pca { variance_threshold })
                .collect(),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const ISOLATION_TREES: usize = 1000;
pub const ISOLATION_SUBSAMPLES: [usize; 4] = [128, 256, 512, 1024];
pub const INNE_ESTIMATORS: usize = 200;
pub const INNE_SUBSAMPLE: usize = 8;
pub const LODA_PROJECTIONS: usize = 100;
pub const PCA_THRESHOLDS: [f64; 4] = [0.30, 0.50, 0.70, 0.90];
pub const CBLOF_ALPHAS: [f64; 3] = [0.7, 0.8, 0.9];
pub const CBLOF_BETAS: [f64; 3] = [3.0, 5.0, 7.0];

/// One concrete hyperparameter assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Params {
    None,
    K {
        k: usize,
    },
    KGrid {
        ks: Vec<usize>,
    },
    Isolation {
        n_trees: usize,
        subsample: usize,
    },
    Extended {
        n_trees: usize,
        subsample: usize,
        extension_level: usize,
    },
    Inne {
        n_estimators: usize,
        subsample: usize,
    },
    Loda {
        n_projections: usize,
    },
    Pca {
        variance_threshold: f64,
    },
    Gmm {
        n_components: usize,
    },
    Cblof {
        k: usize,
        alpha: f64,
        beta: f64,
    },
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Params::None => write!(f, "default"),
            Params::K { k } => write!(f, "k={k}"),
            Params::KGrid { ks } => write!(
                f,
                "k={}..{}",
                ks.first().copied().unwrap_or(0),
                ks.last().copied().unwrap_or(0)
            ),
            Params::Isolation { n_trees, subsample } => {
                write!(f, "n_trees={n_trees},subsample={subsample}")
            }
            Params::Extended {
                n_trees,
                subsample,
                extension_level,
            } => write!(
                f,
                "n_trees={n_trees},subsample={subsample},extension_level={extension_level}"
            ),
            Params::Inne {
                n_estimators,
                subsample,
            } => write!(f, "n_estimators={n_estimators},subsample={subsample}"),
            Params::Loda { n_projections } => write!(f, "n_projections={n_projections}"),
            Params::Pca { variance_threshold } => {
                write!(f, "variance_threshold={variance_threshold}")
            }
            Params::Gmm { n_components } => write!(f, "n_components={n_components}"),
            Params::Cblof { k, alpha, beta } => write!(f, "k={k},alpha={alpha},beta={beta}"),
        }
    }
}

/// An algorithm together with one point of its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub algorithm: Algorithm,
    pub params: Params,
}

impl DetectorSpec {
    /// Builds a spec, checking that `params` is a point of the algorithm's grid.
    pub fn new(algorithm: Algorithm, params: Params) -> Result<Self> {
        if !algorithm.grid().contains(&params) {
            return Err(Error::InvalidParameter(format!(
                "{params} is not in the {algorithm} grid"
            )));
        }
        Ok(DetectorSpec { algorithm, params })
    }

    /// Builds a spec without the grid check, for off-grid experiments.
    pub fn custom(algorithm: Algorithm, params: Params) -> Self {
        DetectorSpec { algorithm, params }
    }

    pub fn score(&self, x: &Array2<f64>, seed: u64) -> Result<ScoreVector> {
        self.score_in(&Workspace::new(x), seed)
    }

    /// Scores using a workspace, sharing the neighbor table between grid points.
    pub fn score_in(&self, ws: &Workspace<'_>, seed: u64) -> Result<ScoreVector> {
        let x = ws.x;
        let mismatch = || {
            Error::InvalidParameter(format!(
                "parameters {} do not fit algorithm {}",
                self.params, self.algorithm
            ))
        };
        match (self.algorithm, &self.params) {
            (Algorithm::Knn, Params::K { k }) => proximity::knn_from_table(ws.neighbors(*k)?, *k),
            (Algorithm::KthNn, Params::K { k }) => {
                proximity::kthnn_from_table(ws.neighbors(*k)?, *k)
            }
            (Algorithm::Lof, Params::K { k }) => {
                proximity::lof_from_table(x, ws.neighbors(*k)?, *k)
            }
            (Algorithm::EnsembleLof, Params::KGrid { ks }) => {
                let k_max = ks.iter().copied().max().ok_or(Error::Empty("k grid"))?;
                proximity::ensemble_lof_from_table(x, ws.neighbors(k_max)?, ks)
            }
            (Algorithm::Cof, Params::K { k }) => {
                proximity::cof_from_table(x, ws.neighbors(*k)?, *k)
            }
            (Algorithm::Odin, Params::K { k }) => proximity::odin_from_table(ws.neighbors(*k)?, *k),
            (Algorithm::Abod, Params::K { k }) => {
                let k = proximity::abod_k(x.nrows(), *k)?;
                proximity::abod_from_table(x, ws.neighbors(k)?, k)
            }
            (Algorithm::IForest, Params::Isolation { n_trees, subsample }) => if_score(
                x,
                &IsolationParams {
                    n_trees: *n_trees,
                    subsample: *subsample,
                    extension_level: 0,
                    seed,
                },
            ),
            (
                Algorithm::Eif,
                Params::Extended {
                    n_trees,
                    subsample,
                    extension_level,
                },
            ) => eif_score(
                x,
                &IsolationParams {
                    n_trees: *n_trees,
                    subsample: *subsample,
                    extension_level: *extension_level,
                    seed,
                },
            ),
            (
                Algorithm::Inne,
                Params::Inne {
                    n_estimators,
                    subsample,
                },
            ) => inne_score(x, *n_estimators, *subsample, seed),
            (Algorithm::Hbos, Params::None) => hbos_score(x),
            (Algorithm::Loda, Params::Loda { n_projections }) => {
                histogram::loda_score_with(x, *n_projections, seed)
            }
            (Algorithm::Pca, Params::Pca { variance_threshold }) => {
                pca_score(x, *variance_threshold)
            }
            (Algorithm::Kde, Params::None) => kde_score(x),
            (Algorithm::Gmm, Params::Gmm { n_components }) => gmm_score(x, *n_components, seed),
            (Algorithm::Copod, Params::None) => copod_score(x),
            (Algorithm::Ecod, Params::None) => ecod_score(x),
            (Algorithm::Cblof, Params::Cblof { k, alpha, beta }) => {
                cblof_score(x, *k, *alpha, *beta, true, seed)
            }
            (Algorithm::UCblof, Params::Cblof { k, alpha, beta }) => {
                cblof_score(x, *k, *alpha, *beta, false, seed)
            }
            _ => Err(mismatch()),
        }
    }
}

/// Per-dataset scratch state shared by all grid points of all detectors.
pub struct Workspace<'a> {
    x: &'a Array2<f64>,
    table: OnceLock<std::result::Result<NeighborTable, String>>,
}

impl<'a> Workspace<'a> {
    pub fn new(x: &'a Array2<f64>) -> Self {
        Workspace {
            x,
            table: OnceLock::new(),
        }
    }

    pub fn x(&self) -> &Array2<f64> {
        self.x
    }

    /// A neighbor table with at least `k` neighbors per sample.
    pub fn neighbors(&self, k: usize) -> Result<&NeighborTable> {
        let n = self.x.nrows();
        if k == 0 || k >= n {
            return Err(Error::KOutOfRange { k, n });
        }
        let table = self.table.get_or_init(|| {
            build_neighbor_table(self.x, SHARED_TABLE_K.max(k).min(n - 1))
                .map_err(|e| e.to_string())
        });
        match table {
            Ok(t) if t.k() >= k => Ok(t),
            Ok(_) => Err(Error::KOutOfRange { k, n }),
            Err(msg) => Err(Error::InvalidParameter(msg.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_cardinalities() {
        let card = |a: Algorithm| a.grid().len();
        assert_eq!(card(Algorithm::Knn), 26);
        assert_eq!(card(Algorithm::Cof), 6);
        assert_eq!(card(Algorithm::Cblof), 117);
        assert_eq!(card(Algorithm::Eif), 12);
        assert_eq!(card(Algorithm::IForest), 4);
        assert_eq!(card(Algorithm::Gmm), 15);
        assert_eq!(card(Algorithm::Pca), 4);
        assert_eq!(card(Algorithm::Copod), 1);
        assert_eq!(card(Algorithm::EnsembleLof), 1);
    }

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(Algorithm::from_name(a.name()), Some(a));
        }
        assert_eq!(Algorithm::from_name("kth-nn"), Some(Algorithm::KthNn));
        assert_eq!(Algorithm::from_name("OCSVM"), None);
    }

    #[test]
    fn spec_rejects_off_grid_params() {
        assert!(DetectorSpec::new(Algorithm::Knn, Params::K { k: 5 }).is_ok());
        assert!(DetectorSpec::new(Algorithm::Knn, Params::K { k: 4 }).is_err());
        assert!(DetectorSpec::new(Algorithm::Cof, Params::K { k: 7 }).is_err());
        assert!(DetectorSpec::new(Algorithm::Pca, Params::Gmm { n_components: 2 }).is_err());
    }
}
