//! Isolation-based ensembles: isolation forest, extended isolation forest
//! and isolation using nearest-neighbor ensembles (INNE).
//!
//! Each tree or estimator draws from its own seeded stream, and path lengths
//! are accumulated in fixed chunks of trees, so scores are bit-identical for a
//! given seed regardless of the number of worker threads.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::ScoreVector;
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, squared_euclidean};
use crate::seed::{stream_rng, Rng};

const TREES_PER_CHUNK: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationParams {
    pub n_trees: usize,
    /// Samples drawn (without replacement) per tree; clamped to `n`.
    pub subsample: usize,
    /// Extra non-zero components of the EIF split normal; clamped to `d - 1`.
    pub extension_level: usize,
    pub seed: u64,
}

impl Default for IsolationParams {
    fn default() -> Self {
        IsolationParams {
            n_trees: 1000,
            subsample: 256,
            extension_level: 1,
            seed: 0,
        }
    }
}

/// Average path length of an unsuccessful binary-search-tree lookup among
/// `m` items, with the exact harmonic number.
pub fn path_length_norm(m: usize) -> f64 {
    match m {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let harmonic = compensated_sum((1..m).map(|i| 1.0 / i as f64));
            2.0 * harmonic - 2.0 * (m - 1) as f64 / m as f64
        }
    }
}

enum Split {
    Axis {
        feature: usize,
        threshold: f64,
    },
    Hyperplane {
        normal: Vec<(usize, f64)>,
        offset: f64,
    },
}

impl Split {
    fn goes_left(&self, x: &[f64]) -> bool {
        match self {
            Split::Axis { feature, threshold } => x[*feature] < *threshold,
            Split::Hyperplane { normal, offset } => {
                normal.iter().map(|&(j, w)| w * x[j]).sum::<f64>() < *offset
            }
        }
    }
}

enum TreeNode {
    Leaf {
        size: usize,
    },
    Internal {
        split: Split,
        left: usize,
        right: usize,
    },
}

struct IsolationTree {
    nodes: Vec<TreeNode>,
}

impl IsolationTree {
    fn grow(
        x: &Array2<f64>,
        samples: Vec<usize>,
        height_limit: usize,
        extension_level: Option<usize>,
        rng: &mut Rng,
    ) -> Self {
        let mut tree = IsolationTree { nodes: Vec::new() };
        tree.grow_node(x, samples, 0, height_limit, extension_level, rng);
        tree
    }

    fn grow_node(
        &mut self,
        x: &Array2<f64>,
        samples: Vec<usize>,
        depth: usize,
        height_limit: usize,
        extension_level: Option<usize>,
        rng: &mut Rng,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            size: samples.len(),
        });
        if depth >= height_limit || samples.len() <= 1 {
            return id;
        }
        let d = x.ncols();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in &samples {
            for j in 0..d {
                lo[j] = lo[j].min(x[[i, j]]);
                hi[j] = hi[j].max(x[[i, j]]);
            }
        }
        let varying: Vec<usize> = (0..d).filter(|&j| hi[j] > lo[j]).collect();
        if varying.is_empty() {
            return id;
        }
        let split = match extension_level {
            None => {
                let feature = varying[rng.random_range(0..varying.len())];
                Split::Axis {
                    feature,
                    threshold: rng.random_range(lo[feature]..hi[feature]),
                }
            }
            Some(level) => {
                let nonzero = (level + 1).min(d);
                let mut normal: Vec<(usize, f64)> = sample(rng, d, nonzero)
                    .into_iter()
                    .map(|j| (j, 0.0))
                    .collect();
                normal.sort_by_key(|&(j, _)| j);
                for w in normal.iter_mut() {
                    w.1 = rng.sample(StandardNormal);
                }
                let offset = normal
                    .iter()
                    .map(|&(j, w)| {
                        let p = if hi[j] > lo[j] {
                            rng.random_range(lo[j]..hi[j])
                        } else {
                            lo[j]
                        };
                        w * p
                    })
                    .sum();
                Split::Hyperplane { normal, offset }
            }
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| split.goes_left(x.row(i).as_slice().expect("standard layout")));
        let l = self.grow_node(x, left, depth + 1, height_limit, extension_level, rng);
        let r = self.grow_node(x, right, depth + 1, height_limit, extension_level, rng);
        self.nodes[id] = TreeNode::Internal {
            split,
            left: l,
            right: r,
        };
        id
    }

    fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { size } => return depth + path_length_norm(*size),
                TreeNode::Internal { split, left, right } => {
                    node = if split.goes_left(x) { *left } else { *right };
                    depth += 1.0;
                }
            }
        }
    }
}

fn forest_score(x: &Array2<f64>, params: &IsolationParams, extended: bool) -> Result<ScoreVector> {
    let x = x.as_standard_layout().into_owned();
    let n = x.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: n,
        });
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be positive".into()));
    }
    let psi = params.subsample.clamp(2, n);
    let height_limit = (psi as f64).log2().ceil() as usize;
    let extension_level = extended.then(|| params.extension_level.min(x.ncols() - 1));

    let chunks: Vec<Vec<f64>> = (0..params.n_trees.div_ceil(TREES_PER_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let first = chunk * TREES_PER_CHUNK;
            let last = (first + TREES_PER_CHUNK).min(params.n_trees);
            let mut sums = vec![0.0; n];
            let mut comps = vec![0.0; n];
            for t in first..last {
                let mut rng = stream_rng(params.seed, t as u64);
                let samples = sample(&mut rng, n, psi).into_vec();
                let tree =
                    IsolationTree::grow(&x, samples, height_limit, extension_level, &mut rng);
                for i in 0..n {
                    let h = tree.path_length(x.row(i).as_slice().expect("standard layout"));
                    let s = sums[i] + h;
                    comps[i] += if sums[i].abs() >= h.abs() {
                        (sums[i] - s) + h
                    } else {
                        (h - s) + sums[i]
                    };
                    sums[i] = s;
                }
            }
            sums.iter().zip(&comps).map(|(s, c)| s + c).collect()
        })
        .collect();

    let norm = path_length_norm(psi);
    let scores = (0..n)
        .map(|i| {
            let mean = compensated_sum(chunks.iter().map(|c| c[i])) / params.n_trees as f64;
            2f64.powf(-mean / norm)
        })
        .collect();
    ScoreVector::new(scores)
}

/// Isolation forest with axis-parallel uniform splits.
pub fn if_score(x: &Array2<f64>, params: &IsolationParams) -> Result<ScoreVector> {
    forest_score(x, params, false)
}

/// Extended isolation forest: random hyperplane splits with
/// `extension_level + 1` non-zero normal components and an intercept drawn
/// uniformly from the node's bounding box.
pub fn eif_score(x: &Array2<f64>, params: &IsolationParams) -> Result<ScoreVector> {
    forest_score(x, params, true)
}

/// INNE: mean over estimators of the hypersphere isolation score.
///
/// Each estimator draws `subsample` centers; a center's radius is the distance
/// to its nearest fellow center. A sample covered by at least one sphere
/// scores `1 - r(nn(c)) / r(c)` for the smallest covering sphere `c`,
/// otherwise 1.
pub fn inne_score(
    x: &Array2<f64>,
    n_estimators: usize,
    subsample: usize,
    seed: u64,
) -> Result<ScoreVector> {
    let x = x.as_standard_layout().into_owned();
    let n = x.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: n,
        });
    }
    if n_estimators == 0 {
        return Err(Error::InvalidParameter(
            "n_estimators must be positive".into(),
        ));
    }
    let psi = subsample.clamp(2, n);
    let row = |i: usize| x.row(i).to_slice().expect("standard layout");

    let per_estimator: Vec<Vec<f64>> = (0..n_estimators)
        .into_par_iter()
        .map(|e| {
            let mut rng = stream_rng(seed, e as u64);
            let centers = sample(&mut rng, n, psi).into_vec();
            let (radius, nn) = center_radii(&centers, &row);
            (0..n)
                .map(|i| isolation_score(row(i), &centers, &radius, &nn, &row))
                .collect()
        })
        .collect();

    let scores = (0..n)
        .map(|i| compensated_sum(per_estimator.iter().map(|s| s[i])) / n_estimators as f64)
        .collect();
    ScoreVector::new(scores)
}

/// Squared radius of each center and the position of its nearest fellow center.
fn center_radii<'a>(
    centers: &[usize],
    row: &impl Fn(usize) -> &'a [f64],
) -> (Vec<f64>, Vec<usize>) {
    let mut radius = vec![f64::INFINITY; centers.len()];
    let mut nn = vec![0; centers.len()];
    for a in 0..centers.len() {
        for b in 0..centers.len() {
            if a != b {
                let d = squared_euclidean(row(centers[a]), row(centers[b]));
                if d < radius[a] {
                    radius[a] = d;
                    nn[a] = b;
                }
            }
        }
    }
    (radius, nn)
}

fn isolation_score<'a>(
    q: &[f64],
    centers: &[usize],
    radius: &[f64],
    nn: &[usize],
    row: &impl Fn(usize) -> &'a [f64],
) -> f64 {
    let mut best: Option<usize> = None;
    for (c, &center) in centers.iter().enumerate() {
        if squared_euclidean(q, row(center)) <= radius[c]
            && best.is_none_or(|b| radius[c] < radius[b])
        {
            best = Some(c);
        }
    }
    match best {
        None => 1.0,
        Some(c) if radius[c] == 0.0 => 0.0,
        Some(c) => 1.0 - (radius[nn[c]] / radius[c]).sqrt(),
    }
}
