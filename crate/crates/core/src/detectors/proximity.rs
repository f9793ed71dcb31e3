//! Distance- and density-based detectors built on the exact neighbor table:
//! kNN, kth-NN, LOF, ensemble-LOF, COF, ODIN and FastABOD.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::data::ScoreVector;
use crate::error::{Error, Result};
use crate::neighbors::{build_neighbor_table, NeighborTable};
use crate::numeric::euclidean;

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::KOutOfRange { k, n });
    }
    Ok(())
}

fn table_for(x: &Array2<f64>, k: usize) -> Result<NeighborTable> {
    check_k(x.nrows(), k)?;
    build_neighbor_table(x, k)
}

fn table_covers(table: &NeighborTable, k: usize) -> Result<()> {
    if k == 0 || k > table.k() {
        return Err(Error::KOutOfRange {
            k,
            n: table.n_samples(),
        });
    }
    Ok(())
}

/// Row `i` of a matrix already brought into standard layout.
fn row<'a>(x: ArrayView2<'a, f64>, i: usize) -> &'a [f64] {
    x.index_axis_move(Axis(0), i)
        .to_slice()
        .expect("standard layout")
}

/// Mean distance to the `k` nearest neighbors.
pub fn knn_score(x: &Array2<f64>, k: usize) -> Result<ScoreVector> {
    knn_from_table(&table_for(x, k)?, k)
}

pub fn knn_from_table(table: &NeighborTable, k: usize) -> Result<ScoreVector> {
    table_covers(table, k)?;
    ScoreVector::new(
        (0..table.n_samples())
            .map(|i| table.distances(i)[..k].iter().sum::<f64>() / k as f64)
            .collect(),
    )
}

/// Distance to the `k`-th nearest neighbor.
pub fn kthnn_score(x: &Array2<f64>, k: usize) -> Result<ScoreVector> {
    kthnn_from_table(&table_for(x, k)?, k)
}

pub fn kthnn_from_table(table: &NeighborTable, k: usize) -> Result<ScoreVector> {
    table_covers(table, k)?;
    ScoreVector::new(
        (0..table.n_samples())
            .map(|i| table.kth_distance(i, k))
            .collect(),
    )
}

/// The k-distance neighborhood of `i`: every sample no farther than the
/// k-th nearest neighbor, which can exceed `k` samples when distances tie.
fn k_distance_neighborhood(
    x: ArrayView2<'_, f64>,
    table: &NeighborTable,
    i: usize,
    k: usize,
) -> Vec<(usize, f64)> {
    let kdist = table.kth_distance(i, k);
    let idx = table.indices(i);
    let dist = table.distances(i);
    let mut end = k;
    while end < table.k() && dist[end] == kdist {
        end += 1;
    }
    if end < table.k() || table.k() + 1 == x.nrows() {
        return idx[..end]
            .iter()
            .copied()
            .zip(dist[..end].iter().copied())
            .collect();
    }
    // the tie may run past the end of the table
    let xi = row(x, i);
    let mut out: Vec<(usize, f64)> = (0..x.nrows())
        .filter(|&j| j != i)
        .filter_map(|j| {
            let d = (crate::numeric::squared_euclidean(xi, row(x, j))).sqrt();
            (d <= kdist).then_some((j, d))
        })
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    out
}

/// Local outlier factor with k-distance neighborhoods.
pub fn lof_score(x: &Array2<f64>, k: usize) -> Result<ScoreVector> {
    lof_from_table(x, &table_for(x, k)?, k)
}

pub fn lof_from_table(x: &Array2<f64>, table: &NeighborTable, k: usize) -> Result<ScoreVector> {
    let x = x.as_standard_layout();
    ScoreVector::new(lof_values(x.view(), table, k)?)
}

fn lof_values(x: ArrayView2<'_, f64>, table: &NeighborTable, k: usize) -> Result<Vec<f64>> {
    table_covers(table, k)?;
    let n = x.nrows();
    let hoods: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| k_distance_neighborhood(x, table, i, k))
        .collect();
    let kdist: Vec<f64> = (0..n).map(|i| table.kth_distance(i, k)).collect();
    let lrd: Vec<f64> = hoods
        .iter()
        .map(|hood| {
            let reach: f64 = hood.iter().map(|&(o, d)| d.max(kdist[o])).sum();
            hood.len() as f64 / reach
        })
        .collect();
    Ok(hoods
        .iter()
        .enumerate()
        .map(|(i, hood)| {
            let sum: f64 = hood.iter().map(|&(o, _)| lrd[o]).sum();
            sum / (hood.len() as f64 * lrd[i])
        })
        .collect())
}

/// Per-sample maximum of LOF over a grid of `k` values.
pub fn ensemble_lof_score(x: &Array2<f64>, k_grid: &[usize]) -> Result<ScoreVector> {
    let k_max = k_grid.iter().copied().max().ok_or(Error::Empty("k grid"))?;
    ensemble_lof_from_table(x, &table_for(x, k_max)?, k_grid)
}

pub fn ensemble_lof_from_table(
    x: &Array2<f64>,
    table: &NeighborTable,
    k_grid: &[usize],
) -> Result<ScoreVector> {
    if k_grid.is_empty() {
        return Err(Error::Empty("k grid"));
    }
    let x = x.as_standard_layout();
    let mut best = vec![f64::NEG_INFINITY; x.nrows()];
    for &k in k_grid {
        for (b, v) in best.iter_mut().zip(lof_values(x.view(), table, k)?) {
            *b = b.max(v);
        }
    }
    ScoreVector::new(best)
}

/// Connectivity-based outlier factor.
///
/// The set-based nearest path through `p` and its `k` neighbors is grown
/// greedily (ties to the lower sample index); its edge costs are combined
/// into the average chaining distance with weights `2(k+1-i) / (k(k+1))`.
/// Only `(k+1)^2` distances per sample are materialized.
pub fn cof_score(x: &Array2<f64>, k: usize) -> Result<ScoreVector> {
    cof_from_table(x, &table_for(x, k)?, k)
}

pub fn cof_from_table(x: &Array2<f64>, table: &NeighborTable, k: usize) -> Result<ScoreVector> {
    table_covers(table, k)?;
    let x = x.as_standard_layout();
    let x = x.view();
    let n = x.nrows();
    let ac_dist: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|p| average_chaining_distance(x, p, &table.indices(p)[..k]))
        .collect();
    ScoreVector::new(
        (0..n)
            .map(|p| {
                let denom: f64 = table.indices(p)[..k].iter().map(|&o| ac_dist[o]).sum();
                k as f64 * ac_dist[p] / denom
            })
            .collect(),
    )
}

fn average_chaining_distance(x: ArrayView2<'_, f64>, p: usize, neighbors: &[usize]) -> f64 {
    let r = neighbors.len();
    // distance from each not-yet-chained neighbor to the chained set
    let mut to_set: Vec<f64> = neighbors
        .iter()
        .map(|&o| euclidean(row(x, p), row(x, o)))
        .collect();
    let mut chained = vec![false; r];
    let mut acd = 0.0;
    for step in 1..=r {
        let mut pick: Option<usize> = None;
        for j in 0..r {
            if chained[j] {
                continue;
            }
            pick = match pick {
                None => Some(j),
                Some(b)
                    if to_set[j] < to_set[b]
                        || (to_set[j] == to_set[b] && neighbors[j] < neighbors[b]) =>
                {
                    Some(j)
                }
                keep => keep,
            };
        }
        let j = pick.expect("unchained neighbor remains");
        chained[j] = true;
        let weight = 2.0 * (r + 1 - step) as f64 / (r * (r + 1)) as f64;
        acd += weight * to_set[j];
        for m in 0..r {
            if !chained[m] {
                let d = euclidean(row(x, neighbors[j]), row(x, neighbors[m]));
                to_set[m] = to_set[m].min(d);
            }
        }
    }
    acd
}

/// ODIN: negated indegree in the directed k-NN graph.
pub fn odin_score(x: &Array2<f64>, k: usize) -> Result<ScoreVector> {
    odin_from_table(&table_for(x, k)?, k)
}

pub fn odin_from_table(table: &NeighborTable, k: usize) -> Result<ScoreVector> {
    table_covers(table, k)?;
    let mut indegree = vec![0usize; table.n_samples()];
    for i in 0..table.n_samples() {
        for &j in &table.indices(i)[..k] {
            indegree[j] += 1;
        }
    }
    ScoreVector::new(indegree.into_iter().map(|d| -(d as f64)).collect())
}

/// Neighbor count FastABOD uses for `n` samples when asked for `k`.
pub fn abod_k(n: usize, k: usize) -> Result<usize> {
    if n < 4 {
        return Err(Error::TooFewSamples {
            required: 4,
            found: n,
        });
    }
    if k < 2 {
        return Err(Error::KOutOfRange { k, n });
    }
    Ok(k.min(n - 1))
}

/// FastABOD: negated variance of the distance-weighted angle terms
/// `<a, b> / (|a|^2 |b|^2)` over pairs of the `k` nearest neighbors.
pub fn abod_score(x: &Array2<f64>, k: usize) -> Result<ScoreVector> {
    let k = abod_k(x.nrows(), k)?;
    abod_from_table(x, &build_neighbor_table(x, k)?, k)
}

pub fn abod_from_table(x: &Array2<f64>, table: &NeighborTable, k: usize) -> Result<ScoreVector> {
    table_covers(table, k)?;
    let x = x.as_standard_layout();
    let x = x.view();
    let n = x.nrows();
    let d = x.ncols();
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = row(x, i);
            let diffs: Vec<Vec<f64>> = table.indices(i)[..k]
                .iter()
                .map(|&j| row(x, j).iter().zip(xi).map(|(a, b)| a - b).collect())
                .collect();
            let norms2: Vec<f64> = diffs
                .iter()
                .map(|v| v.iter().map(|a| a * a).sum())
                .collect();
            let mut terms = Vec::with_capacity(k * (k - 1) / 2);
            for a in 0..k {
                for b in a + 1..k {
                    let dot: f64 = (0..d).map(|f| diffs[a][f] * diffs[b][f]).sum();
                    terms.push(dot / norms2[a] / norms2[b]);
                }
            }
            let mean = terms.iter().sum::<f64>() / terms.len() as f64;
            let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / terms.len() as f64;
            -var
        })
        .collect();
    ScoreVector::new(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, ShapeBuilder};

    fn line() -> Array2<f64> {
        array![[0.0], [1.0], [2.0], [10.0]]
    }

    #[test]
    fn knn_on_line() {
        assert_eq!(&*knn_score(&line(), 2).unwrap(), &[1.5, 1.0, 1.5, 8.5]);
    }

    #[test]
    fn kthnn_on_line() {
        assert_eq!(&*kthnn_score(&line(), 2).unwrap(), &[2.0, 1.0, 2.0, 9.0]);
    }

    #[test]
    fn odin_on_line() {
        assert_eq!(&*odin_score(&line(), 1).unwrap(), &[-1.0, -2.0, -1.0, 0.0]);
    }

    #[test]
    fn k_out_of_range_errors() {
        assert!(knn_score(&line(), 4).is_err());
        assert!(lof_score(&line(), 0).is_err());
        assert!(abod_score(&array![[0.0], [1.0], [2.0]], 60).is_err());
    }

    #[test]
    fn lof_is_one_on_interior_of_grid() {
        let mut pts = Vec::new();
        for a in 0..10 {
            for b in 0..10 {
                pts.extend([a as f64, b as f64]);
            }
        }
        let x = Array2::from_shape_vec((100, 2), pts).unwrap();
        let s = lof_score(&x, 4).unwrap();
        for a in 2..8 {
            for b in 2..8 {
                let v = s[a * 10 + b];
                assert!((0.9..=1.1).contains(&v), "LOF {v} at ({a},{b})");
            }
        }
    }

    #[test]
    fn lof_neighborhood_includes_ties() {
        // the point at the origin has four neighbors at distance 1
        let x = array![
            [0.0, 0.0],
            [1.0, 0.0],
            [-1.0, 0.0],
            [0.0, 1.0],
            [0.0, -1.0],
            [5.0, 5.0]
        ];
        let table = build_neighbor_table(&x, 2).unwrap();
        assert_eq!(k_distance_neighborhood(x.view(), &table, 0, 2).len(), 4);
    }

    #[test]
    fn ensemble_with_single_k_is_lof() {
        let x = array![
            [0.0, 0.0],
            [1.0, 0.2],
            [0.3, 1.0],
            [1.2, 1.1],
            [4.0, 4.0],
            [0.5, 0.6]
        ];
        assert_eq!(
            ensemble_lof_score(&x, &[2]).unwrap(),
            lof_score(&x, 2).unwrap()
        );
        assert!(ensemble_lof_score(&x, &[]).is_err());
    }

    #[test]
    fn cof_flags_off_line_point() {
        let mut x = Array2::zeros((11, 2));
        for i in 0..10 {
            x[[i, 0]] = i as f64;
        }
        x[[10, 0]] = 4.5;
        x[[10, 1]] = 3.0;
        let s = cof_score(&x, 3).unwrap();
        let argmax = (0..11).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert_eq!(argmax, 10);
    }

    #[test]
    fn odin_clique_scores_equal() {
        // equilateral triangle, k = 2: everybody points at everybody
        let h = 3f64.sqrt() / 2.0;
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.5, h]];
        let s = odin_score(&x, 2).unwrap();
        assert!(s.iter().all(|&v| v == s[0]));
    }

    #[test]
    fn abod_far_point_is_max() {
        let x = array![
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.1],
            [0.1, 0.1],
            [0.05, 0.02],
            [0.03, 0.08],
            [5.0, 5.0]
        ];
        let s = abod_score(&x, 60).unwrap();
        let argmax = (0..7).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert_eq!(argmax, 6);
    }

    #[test]
    fn column_major_input_scores_like_row_major() {
        let x = array![
            [0.0, 0.0, 1.0],
            [1.0, 0.2, 0.0],
            [0.3, 1.0, 0.5],
            [1.1, 1.3, 0.2],
            [0.6, 0.4, 0.9],
            [5.0, 4.0, 3.0]
        ];
        let mut f = Array2::zeros((6, 3).f());
        f.assign(&x);
        assert!(f.as_slice().is_none());
        assert_eq!(lof_score(&f, 2).unwrap(), lof_score(&x, 2).unwrap());
        assert_eq!(cof_score(&f, 2).unwrap(), cof_score(&x, 2).unwrap());
        assert_eq!(abod_score(&f, 3).unwrap(), abod_score(&x, 3).unwrap());
        assert_eq!(
            ensemble_lof_score(&f, &[2, 3]).unwrap(),
            ensemble_lof_score(&x, &[2, 3]).unwrap()
        );
    }
}
