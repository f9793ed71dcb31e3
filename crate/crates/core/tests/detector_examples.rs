//! Behavioral examples for the randomized and model-based detectors and the
//! synthetic archetype generators.

mod common;

use common::*;
use ndarray::{array, Array2};
use odbench_core::detectors::*;
use odbench_core::evaluation::roc_auc;
use odbench_core::neighbors::build_neighbor_table;
use odbench_core::numeric::average_ranks;
use odbench_core::synth::{generate_archetype, Archetype, ArchetypeSpec};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_blob(seed: u64, n: usize, d: usize, scale: f64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((n, d), |_| {
        let z: f64 = StandardNormal.sample(&mut r);
        z * scale
    })
}

fn with_point(x: &Array2<f64>, point: &[f64]) -> Array2<f64> {
    let extra = Array2::from_shape_vec((1, point.len()), point.to_vec()).unwrap();
    ndarray::concatenate![ndarray::Axis(0), *x, extra]
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[test]
fn far_singleton_tops_isolation_forest() {
    let mut hits = 0;
    for seed in 0..50 {
        let x = with_point(&gaussian_blob(seed, 100, 2, 0.3), &[6.0, 6.0]);
        let params = IsolationParams {
            n_trees: 200,
            subsample: 64,
            seed,
            ..Default::default()
        };
        let s = if_score(&x, &params).unwrap();
        if argmax(&s) == 100 {
            hits += 1;
        }
    }
    assert!(hits >= 48, "{hits}/50");
}

#[test]
fn one_component_extended_forest_tracks_axis_forest() {
    for seed in 0..5 {
        let x = with_point(&gaussian_blob(seed, 200, 3, 1.0), &[5.0, -5.0, 5.0]);
        let axis = if_score(
            &x,
            &IsolationParams {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let flat = IsolationParams {
            extension_level: 0,
            seed: seed + 1000,
            ..Default::default()
        };
        let ext = eif_score(&x, &flat).unwrap();
        let rho = spearman(&axis, &ext);
        assert!(rho > 0.9, "seed {seed}: {rho}");
    }
}

#[test]
fn farther_points_score_higher_on_average() {
    let base = gaussian_blob(11, 150, 2, 1.0);
    let x = with_point(&with_point(&base, &[2.5, 0.0]), &[5.0, 0.0]);
    let mut near = 0.0;
    let mut far = 0.0;
    for seed in 0..50 {
        let params = IsolationParams {
            n_trees: 100,
            seed,
            ..Default::default()
        };
        let s = if_score(&x, &params).unwrap();
        near += s[150];
        far += s[151];
    }
    assert!(far > near);
}

#[test]
fn uncovered_query_scores_one() {
    // far point is never a center's nearest neighbor, so with ψ = 2 every
    // center pair either contains it or leaves it far outside both spheres
    let x = array![[0.0], [0.1], [0.2], [0.3], [50.0]];
    let s = inne_score(&x, 50, 2, 3).unwrap();
    assert!(s[4] > s[0]);
    let x = array![[0.0], [1.0], [100.0]];
    let s = inne_score(&x, 1, 3, 0).unwrap();
    assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn single_gaussian_ranks_follow_mahalanobis_distance() {
    let mut r = rng(12);
    let x = Array2::from_shape_fn((60, 2), |(_, j)| {
        let z: f64 = StandardNormal.sample(&mut r);
        if j == 0 {
            2.0 * z
        } else {
            0.5 * z
        }
    });
    let n = x.nrows() as f64;
    let mean = [x.column(0).sum() / n, x.column(1).sum() / n];
    let mut c = [[0.0; 2]; 2];
    for row in x.rows() {
        for a in 0..2 {
            for b in 0..2 {
                c[a][b] += (row[a] - mean[a]) * (row[b] - mean[b]) / n;
            }
        }
    }
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let inv = [
        [c[1][1] / det, -c[0][1] / det],
        [-c[1][0] / det, c[0][0] / det],
    ];
    let maha: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|row| {
            let v = [row[0] - mean[0], row[1] - mean[1]];
            v[0] * (inv[0][0] * v[0] + inv[0][1] * v[1])
                + v[1] * (inv[1][0] * v[0] + inv[1][1] * v[1])
        })
        .collect();
    let s = gmm_score(&x, 1, 5).unwrap();
    assert_eq!(average_ranks(&s), average_ranks(&maha));
}

#[test]
fn gmm_and_loda_are_seed_deterministic() {
    let x = gaussian_blob(13, 80, 3, 1.0);
    assert_eq!(gmm_score(&x, 3, 9).unwrap(), gmm_score(&x, 3, 9).unwrap());
    assert_eq!(loda_score(&x, 9).unwrap(), loda_score(&x, 9).unwrap());
}

#[test]
fn hbos_is_additive_over_features() {
    let x = gaussian_blob(14, 90, 2, 1.0);
    let both = hbos_score(&x).unwrap();
    let a = hbos_score(&x.slice(ndarray::s![.., 0..1]).to_owned()).unwrap();
    let b = hbos_score(&x.slice(ndarray::s![.., 1..2]).to_owned()).unwrap();
    for i in 0..90 {
        assert!((both[i] - a[i] - b[i]).abs() < 1e-9);
    }
}

#[test]
fn copula_detectors_flag_extreme_value() {
    let x = Array2::from_shape_vec(
        (10, 1),
        vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 100.0],
    )
    .unwrap();
    assert_eq!(argmax(&copod_score(&x).unwrap()), 9);
    // the minimum's left tail mirrors the maximum's right tail, so they tie
    let s = ecod_score(&x).unwrap();
    assert_eq!(s[9], s.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    assert_eq!(s[9], s[0]);
}

#[test]
fn copod_ignores_feature_negation() {
    let mut r = rng(15);
    for _ in 0..100 {
        let n = r.random_range(5..40);
        let d = r.random_range(1..5);
        let x = Array2::from_shape_fn((n, d), |_| r.random::<f64>());
        let neg = x.mapv(|v| -v);
        assert_eq!(copod_score(&x).unwrap(), copod_score(&neg).unwrap());
    }
}

#[test]
fn stray_point_tops_both_cblof_variants() {
    let mut x = gaussian_blob(16, 40, 2, 0.2);
    for i in 20..40 {
        x[[i, 0]] += 10.0;
    }
    let x = with_point(&x, &[5.0, 8.0]);
    for weighted in [true, false] {
        let s = cblof_score(&x, 2, 0.9, 5.0, weighted, 1).unwrap();
        assert_eq!(argmax(&s), 40);
    }
}

#[test]
fn isotropic_pca_keeps_both_components() {
    let x = with_point(&gaussian_blob(17, 200, 2, 1.0), &[4.0, -3.0]);
    let s = pca_score(&x, 0.9).unwrap();
    assert_eq!(argmax(&s), 200);
}

fn spec(archetype: Archetype, n: usize, seed: u64) -> ArchetypeSpec {
    ArchetypeSpec {
        archetype,
        n,
        d: 2,
        contamination: 0.05,
        seed,
    }
}

fn split_rows(ds: &odbench_core::Dataset) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let labels = ds.labels.as_ref().unwrap();
    let mut normal = Vec::new();
    let mut anomalous = Vec::new();
    for (row, &l) in ds.features.rows().into_iter().zip(labels) {
        if l == 1 {
            anomalous.push(row.to_vec());
        } else {
            normal.push(row.to_vec());
        }
    }
    (normal, anomalous)
}

#[test]
fn peripheral_anomalies_leave_the_normal_box() {
    for seed in 0..5 {
        let ds = generate_archetype(&spec(Archetype::Peripheral, 400, seed)).unwrap();
        let (normal, anomalous) = split_rows(&ds);
        assert_eq!(anomalous.len(), 20);
        for a in &anomalous {
            let outside = (0..2).any(|j| {
                let lo = normal.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                let hi = normal
                    .iter()
                    .map(|r| r[j])
                    .fold(f64::NEG_INFINITY, f64::max);
                a[j] < lo || a[j] > hi
            });
            assert!(outside);
        }
    }
}

#[test]
fn global_anomalies_exceed_normal_kth_distance_percentile() {
    for seed in 0..3 {
        let ds = generate_archetype(&spec(Archetype::Global, 1000, seed)).unwrap();
        let labels = ds.labels.as_ref().unwrap();
        let t = build_neighbor_table(&ds.features, 10).unwrap();
        let kth: Vec<f64> = (0..1000).map(|i| t.distances(i)[9]).collect();
        let mut normal: Vec<f64> = (0..1000)
            .filter(|&i| labels[i] == 0)
            .map(|i| kth[i])
            .collect();
        normal.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p95 = normal[(0.95 * (normal.len() - 1) as f64).round() as usize];
        for i in (0..1000).filter(|&i| labels[i] == 1) {
            assert!(kth[i] > p95);
        }
    }
}

fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull by the monotone chain.
fn convex_hull(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut hull: Vec<Vec<f64>> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec<f64>>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for q in iter {
            while hull.len() >= start + 2
                && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], q) <= 0.0
            {
                hull.pop();
            }
            hull.push(q.clone());
        }
        hull.pop();
    }
    hull
}

#[test]
fn enclosed_anomalies_sit_inside_the_normal_hull() {
    for seed in 0..5 {
        let ds = generate_archetype(&spec(Archetype::Enclosed, 400, seed)).unwrap();
        let (normal, anomalous) = split_rows(&ds);
        let hull = convex_hull(&normal);
        for a in &anomalous {
            for i in 0..hull.len() {
                assert!(cross(&hull[i], &hull[(i + 1) % hull.len()], a) > 0.0);
            }
        }
    }
}

#[test]
fn multivariate_anomalies_hide_in_marginals() {
    for seed in 0..5 {
        let ds = generate_archetype(&spec(Archetype::Multivariate, 600, seed)).unwrap();
        let (normal, anomalous) = split_rows(&ds);
        let n = normal.len() as f64;
        let mean = [
            normal.iter().map(|r| r[0]).sum::<f64>() / n,
            normal.iter().map(|r| r[1]).sum::<f64>() / n,
        ];
        let mut c = [[0.0; 2]; 2];
        for r in &normal {
            for a in 0..2 {
                for b in 0..2 {
                    c[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]) / (n - 1.0);
                }
            }
        }
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let maha = |r: &[f64]| {
            let v = [r[0] - mean[0], r[1] - mean[1]];
            (c[1][1] * v[0] * v[0] - 2.0 * c[0][1] * v[0] * v[1] + c[0][0] * v[1] * v[1]) / det
        };
        let mut normal_d: Vec<f64> = normal.iter().map(|r| maha(r)).collect();
        normal_d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p99 = normal_d[(0.99 * (normal_d.len() - 1) as f64).round() as usize];
        for a in &anomalous {
            for j in 0..2 {
                let lo = normal.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                let hi = normal
                    .iter()
                    .map(|r| r[j])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(a[j] >= lo && a[j] <= hi);
            }
            assert!(maha(a) > p99);
        }
    }
}

#[test]
fn clustered_and_univariate_archetypes_are_detectable() {
    for archetype in [
        Archetype::Clustered,
        Archetype::Univariate,
        Archetype::Isolated,
    ] {
        let ds = generate_archetype(&spec(archetype, 400, 2)).unwrap();
        let s = knn_score(&ds.features, 30).unwrap();
        let auc = roc_auc(&s, ds.labels.as_ref().unwrap()).unwrap();
        assert!(auc > 0.9, "{archetype}: {auc}");
    }
}

#[test]
fn proximity_detectors_rank_a_far_point_first() {
    use odbench_core::{Algorithm, DetectorSpec};
    let proximity = [
        Algorithm::Knn,
        Algorithm::KthNn,
        Algorithm::Lof,
        Algorithm::EnsembleLof,
        Algorithm::Cof,
        Algorithm::Abod,
        Algorithm::Odin,
    ];
    for seed in 0..50 {
        let x = with_point(&gaussian_blob(1000 + seed, 70, 2, 1.0), &[12.0, 12.0]);
        for alg in proximity {
            let params = alg.grid().into_iter().next().unwrap();
            let s = DetectorSpec::new(alg, params)
                .unwrap()
                .score(&x, seed)
                .unwrap();
            if alg == Algorithm::Odin {
                // zero indegree can be shared with other samples
                assert_eq!(s[70], s.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            } else {
                assert_eq!(argmax(&s), 70, "{} seed {seed}", alg.name());
            }
        }
    }
}
