//! Independent reference implementations used by the integration tests.
//! Each one follows the textbook definition directly, trading speed for
//! obviousness.
#![allow(dead_code)]

use ndarray::Array2;
use odbench_core::clustermap::Dendrogram;
use odbench_core::preprocess::dedupe_rows;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dist(x: &Array2<f64>, i: usize, j: usize) -> f64 {
    x.row(i)
        .iter()
        .zip(x.row(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Random deduplicated matrix; `lattice` draws small integers to force ties.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize, lattice: bool) -> Array2<f64> {
    let x = Array2::from_shape_fn((n, d), |_| {
        if lattice {
            rng.random_range(0..6) as f64
        } else {
            rng.sample::<f64, _>(StandardNormal)
        }
    });
    dedupe_rows(&x).0
}

/// All other samples sorted by (distance, index), truncated to `k`.
pub fn brute_neighbors(x: &Array2<f64>, k: usize) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let n = x.nrows();
    let mut idx = Vec::with_capacity(n);
    let mut dst = Vec::with_capacity(n);
    for i in 0..n {
        let mut all: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let sq: f64 = x
                    .row(i)
                    .iter()
                    .zip(x.row(j).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (sq, j)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        all.truncate(k);
        idx.push(all.iter().map(|p| p.1).collect());
        dst.push(all.iter().map(|p| p.0.sqrt()).collect());
    }
    (idx, dst)
}

fn sorted_distances(x: &Array2<f64>, i: usize) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = (0..x.nrows())
        .filter(|&j| j != i)
        .map(|j| (dist(x, i, j), j))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all
}

pub fn knn_oracle(x: &Array2<f64>, k: usize) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| sorted_distances(x, i)[..k].iter().map(|p| p.0).sum::<f64>() / k as f64)
        .collect()
}

/// LOF with k-distance neighborhoods: every point within the k-distance.
pub fn lof_oracle(x: &Array2<f64>, k: usize) -> Vec<f64> {
    let n = x.nrows();
    let kdist: Vec<f64> = (0..n).map(|i| sorted_distances(x, i)[k - 1].0).collect();
    let hood: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && dist(x, i, j) <= kdist[i])
                .collect()
        })
        .collect();
    let lrd: Vec<f64> = (0..n)
        .map(|i| {
            let reach: f64 = hood[i].iter().map(|&o| dist(x, i, o).max(kdist[o])).sum();
            hood[i].len() as f64 / reach
        })
        .collect();
    (0..n)
        .map(|i| hood[i].iter().map(|&o| lrd[o] / lrd[i]).sum::<f64>() / hood[i].len() as f64)
        .collect()
}

/// Average chaining distance along the set-based nearest path from `p`
/// through its `k` nearest neighbors; ties go to the lower sample index.
fn chaining_distance(x: &Array2<f64>, p: usize, hood: &[usize]) -> f64 {
    let r = hood.len();
    let mut chained = vec![p];
    let mut rest: Vec<usize> = hood.to_vec();
    let mut costs = Vec::new();
    while !rest.is_empty() {
        let mut best: Option<(f64, usize, usize)> = None;
        for (pos, &o) in rest.iter().enumerate() {
            let to_set = chained
                .iter()
                .map(|&c| dist(x, c, o))
                .fold(f64::INFINITY, f64::min);
            let better = match best {
                None => true,
                Some((d, _, idx)) => to_set < d || (to_set == d && o < idx),
            };
            if better {
                best = Some((to_set, pos, o));
            }
        }
        let (d, pos, o) = best.unwrap();
        costs.push(d);
        chained.push(o);
        rest.remove(pos);
    }
    costs
        .iter()
        .enumerate()
        .map(|(i, c)| 2.0 * (r - i) as f64 / (r * (r + 1)) as f64 * c)
        .sum()
}

pub fn cof_oracle(x: &Array2<f64>, k: usize) -> Vec<f64> {
    let n = x.nrows();
    let hoods: Vec<Vec<usize>> = (0..n)
        .map(|i| sorted_distances(x, i)[..k].iter().map(|p| p.1).collect())
        .collect();
    let acd: Vec<f64> = (0..n).map(|i| chaining_distance(x, i, &hoods[i])).collect();
    (0..n)
        .map(|i| acd[i] / (hoods[i].iter().map(|&o| acd[o]).sum::<f64>() / k as f64))
        .collect()
}

/// Negated population variance of `<a,b> / (|a|^2 |b|^2)` over ordered
/// pairs of distinct neighbors.
pub fn abod_oracle(x: &Array2<f64>, k: usize) -> Vec<f64> {
    let n = x.nrows();
    (0..n)
        .map(|i| {
            let hood: Vec<usize> = sorted_distances(x, i)[..k].iter().map(|p| p.1).collect();
            let vecs: Vec<Vec<f64>> = hood
                .iter()
                .map(|&j| {
                    x.row(j)
                        .iter()
                        .zip(x.row(i).iter())
                        .map(|(a, b)| a - b)
                        .collect()
                })
                .collect();
            let mut terms = Vec::new();
            for a in 0..k {
                for b in 0..k {
                    if a == b {
                        continue;
                    }
                    let dot: f64 = vecs[a].iter().zip(&vecs[b]).map(|(p, q)| p * q).sum();
                    let na: f64 = vecs[a].iter().map(|v| v * v).sum();
                    let nb: f64 = vecs[b].iter().map(|v| v * v).sum();
                    terms.push(dot / (na * nb));
                }
            }
            let m = terms.len() as f64;
            let mean = terms.iter().sum::<f64>() / m;
            -(terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / m)
        })
        .collect()
}

/// AUC by counting every (anomaly, normal) pair: 1 per win, 0.5 per tie.
pub fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// UPGMA recomputing each inter-cluster distance from scratch as the mean
/// over cross pairs. Returns merge heights in order.
pub fn upgma_naive(d: &Array2<f64>) -> Vec<f64> {
    let mut clusters: Vec<Vec<usize>> = (0..d.nrows()).map(|i| vec![i]).collect();
    let mut heights = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut s = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        s += d[[i, j]];
                    }
                }
                let v = s / (clusters[a].len() * clusters[b].len()) as f64;
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        let (h, a, b) = best;
        let merged: Vec<usize> = clusters[a].iter().chain(&clusters[b]).copied().collect();
        clusters.remove(b);
        clusters[a] = merged;
        heights.push(h);
    }
    heights
}

/// Minimum adjacent-distance cost over every combination of subtree flips.
pub fn exhaustive_flip_min(dend: &Dendrogram, d: &Array2<f64>) -> f64 {
    let internal = dend.merges.len();
    let n = dend.n_leaves();
    let mut best = f64::INFINITY;
    for mask in 0u64..(1u64 << internal) {
        let order = flipped_order(dend, dend.root(), n, mask);
        let cost: f64 = order.windows(2).map(|w| d[[w[0], w[1]]]).sum();
        best = best.min(cost);
    }
    best
}

fn flipped_order(dend: &Dendrogram, node: usize, n: usize, mask: u64) -> Vec<usize> {
    match dend.children(node) {
        None => vec![node],
        Some((a, b)) => {
            let (first, second) = if mask >> (node - n) & 1 == 1 {
                (b, a)
            } else {
                (a, b)
            };
            let mut out = flipped_order(dend, first, n, mask);
            out.extend(flipped_order(dend, second, n, mask));
            out
        }
    }
}

/// Whether `order` can be produced from the dendrogram by subtree flips.
pub fn consistent_with_topology(dend: &Dendrogram, order: &[usize]) -> bool {
    let pos: Vec<usize> = {
        let mut p = vec![0; order.len()];
        for (i, &l) in order.iter().enumerate() {
            p[l] = i;
        }
        p
    };
    (dend.n_leaves()..=dend.root()).all(|v| {
        let leaves = dend.leaves(v);
        let lo = leaves.iter().map(|&l| pos[l]).min().unwrap();
        let hi = leaves.iter().map(|&l| pos[l]).max().unwrap();
        hi - lo + 1 == leaves.len()
    })
}

/// `1 - cov(a, b) / (sd(a) sd(b))` with the n-1 covariance formula.
pub fn pearson_distance_oracle(rows: &Array2<f64>) -> Array2<f64> {
    let n = rows.nrows();
    let m = rows.ncols() as f64;
    let stats: Vec<(f64, f64)> = rows
        .rows()
        .into_iter()
        .map(|r| {
            let mean = r.sum() / m;
            let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            (mean, var.sqrt())
        })
        .collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            return 0.0;
        }
        let cov = rows
            .row(i)
            .iter()
            .zip(rows.row(j).iter())
            .map(|(a, b)| (a - stats[i].0) * (b - stats[j].0))
            .sum::<f64>()
            / (m - 1.0);
        1.0 - cov / (stats[i].1 * stats[j].1)
    })
}

/// Descending-value ranks with average ties, by explicit counting.
pub fn descending_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let greater = values.iter().filter(|&&w| w > v).count() as f64;
            let equal = values.iter().filter(|&&w| w == v).count() as f64;
            greater + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
