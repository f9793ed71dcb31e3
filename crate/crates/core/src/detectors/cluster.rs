//! k-means with distance-weighted seeding, and the cluster-based local
//! outlier factor in weighted (CBLOF) and unweighted (u-CBLOF) form.

use ndarray::{Array2, ArrayView1};
use rand::Rng as _;

use crate::data::ScoreVector;
use crate::error::{Error, Result};
use crate::numeric::squared_euclidean;
use crate::seed::{rng, Rng};

pub const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Array2<f64>,
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
    pub n_iter: usize,
}

fn row(x: &Array2<f64>, i: usize) -> ArrayView1<'_, f64> {
    x.row(i)
}

fn dist2(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// k-means++ seeding: the first center uniformly, then each next center with
/// probability proportional to the squared distance to the nearest chosen one.
pub(crate) fn plus_plus_centers(x: &Array2<f64>, k: usize, rng: &mut Rng) -> Vec<usize> {
    let n = x.nrows();
    let mut centers = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| dist2(row(x, i), row(x, centers[0])))
        .collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !centers.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        centers.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist2(row(x, i), row(x, next)));
        }
    }
    centers
}

fn nearest_centroid(point: ArrayView1<'_, f64>, centroids: &Array2<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.nrows() {
        let d = dist2(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

/// Lloyd's algorithm from k-means++ seeds, one restart, at most
/// [`KMEANS_MAX_ITER`] iterations. An emptied cluster keeps its centroid.
pub fn kmeans(x: &Array2<f64>, k: usize, seed: u64) -> Result<KMeans> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(Error::Empty("data"));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let k = k.min(n);
    let mut rng = rng(seed);
    let seeds = plus_plus_centers(x, k, &mut rng);
    let mut centroids = Array2::zeros((k, d));
    for (c, &i) in seeds.iter().enumerate() {
        centroids.row_mut(c).assign(&x.row(i));
    }
    let mut labels = vec![usize::MAX; n];
    let mut n_iter = 0;
    while n_iter < KMEANS_MAX_ITER {
        n_iter += 1;
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let c = nearest_centroid(x.row(i), &centroids);
            if c != *label {
                *label = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            sums.row_mut(c).scaled_add(1.0, &x.row(i));
            counts[c] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / count as f64));
            }
        }
    }
    let mut sizes = vec![0; k];
    for &c in &labels {
        sizes[c] += 1;
    }
    Ok(KMeans {
        centroids,
        labels,
        sizes,
        n_iter,
    })
}

/// Partition of clusters into "large" and "small".
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSplit {
    /// Non-empty cluster ids ordered by size, largest first (ties by id).
    pub order: Vec<usize>,
    pub sizes: Vec<usize>,
    /// The first `boundary` clusters of `order` are large.
    pub boundary: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl ClusterSplit {
    /// Chooses the boundary `b` among positions where the largest `b`
    /// clusters hold at least `alpha * n` samples and/or the size ratio across
    /// the boundary is at least `beta`. Positions meeting both rules win, then
    /// the alpha rule, then the beta rule; the first such position is used.
    /// Without any valid position every cluster is large.
    pub fn new(cluster_sizes: &[usize], alpha: f64, beta: f64) -> Self {
        let mut order: Vec<usize> = (0..cluster_sizes.len())
            .filter(|&c| cluster_sizes[c] > 0)
            .collect();
        order.sort_by(|&a, &b| cluster_sizes[b].cmp(&cluster_sizes[a]).then(a.cmp(&b)));
        let sizes: Vec<usize> = order.iter().map(|&c| cluster_sizes[c]).collect();
        let n: usize = sizes.iter().sum();
        let mut alpha_ok = Vec::new();
        let mut beta_ok = Vec::new();
        let mut covered = 0;
        for b in 1..sizes.len() {
            covered += sizes[b - 1];
            if covered as f64 >= alpha * n as f64 {
                alpha_ok.push(b);
            }
            if sizes[b - 1] as f64 / sizes[b] as f64 >= beta {
                beta_ok.push(b);
            }
        }
        let boundary = alpha_ok
            .iter()
            .find(|b| beta_ok.contains(b))
            .or(alpha_ok.first())
            .or(beta_ok.first())
            .copied()
            .unwrap_or(sizes.len());
        ClusterSplit {
            order,
            sizes,
            boundary,
            alpha,
            beta,
        }
    }

    pub fn large(&self) -> &[usize] {
        &self.order[..self.boundary]
    }

    pub fn small(&self) -> &[usize] {
        &self.order[self.boundary..]
    }

    pub fn is_large(&self, cluster: usize) -> bool {
        self.large().contains(&cluster)
    }
}

/// Scores each sample by its distance to its own centroid when its cluster
/// is large, else to the nearest large-cluster centroid; `weighted`
/// multiplies by the size of the sample's cluster.
pub fn cblof_score(
    x: &Array2<f64>,
    k: usize,
    alpha: f64,
    beta: f64,
    weighted: bool,
    seed: u64,
) -> Result<ScoreVector> {
    let fit = kmeans(x, k, seed)?;
    let split = ClusterSplit::new(&fit.sizes, alpha, beta);
    let large = split.large();
    let scores = (0..x.nrows())
        .map(|i| {
            let point = x.row(i).to_vec();
            let c = fit.labels[i];
            let dist = if split.is_large(c) {
                squared_euclidean(&point, &fit.centroids.row(c).to_vec()).sqrt()
            } else {
                large
                    .iter()
                    .map(|&l| squared_euclidean(&point, &fit.centroids.row(l).to_vec()))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            };
            if weighted {
                dist * fit.sizes[c] as f64
            } else {
                dist
            }
        })
        .collect();
    ScoreVector::new(scores)
}
