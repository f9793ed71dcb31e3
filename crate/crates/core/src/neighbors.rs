//! Exact Euclidean k-nearest-neighbor tables.
//!
//! Low-dimensional data (d <= 16) is searched with a k-d tree, anything wider
//! by brute force. Both paths order candidates by the same key, the squared
//! distance summed over features in index order with ties going to the lower
//! sample index, so they produce identical tables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::squared_euclidean;

/// Dimensionality above which the k-d tree is not used.
pub const KD_TREE_MAX_DIM: usize = 16;
const LEAF_SIZE: usize = 16;

/// For each sample, its `k` nearest other samples in increasing distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    k: usize,
    indices: Array2<usize>,
    distances: Array2<f64>,
}

impl NeighborTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_samples(&self) -> usize {
        self.indices.nrows()
    }

    pub fn indices(&self, i: usize) -> &[usize] {
        self.indices.row(i).to_slice().expect("row-major table")
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        self.distances.row(i).to_slice().expect("row-major table")
    }

    /// Distance to the `k`-th nearest neighbor (1-based).
    pub fn kth_distance(&self, i: usize, k: usize) -> f64 {
        self.distances[[i, k - 1]]
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded max-heap keeping the `k` smallest candidates.
struct KBest {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl KBest {
    fn new(k: usize) -> Self {
        KBest {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if c < *self.heap.peek().expect("k >= 1") {
            self.heap.pop();
            self.heap.push(c);
        }
    }

    /// Largest accepted squared distance, or infinity while not full.
    fn bound(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |c| c.dist2)
        }
    }

    fn into_sorted(self) -> Vec<Candidate> {
        self.heap.into_sorted_vec()
    }
}

enum Node {
    Leaf {
        lo: Vec<f64>,
        hi: Vec<f64>,
        points: Vec<usize>,
    },
    Split {
        lo: Vec<f64>,
        hi: Vec<f64>,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn bounds(&self) -> (&[f64], &[f64]) {
        match self {
            Node::Leaf { lo, hi, .. } | Node::Split { lo, hi, .. } => (lo, hi),
        }
    }

    /// Squared distance from `q` to the node's bounding box. Never exceeds the
    /// computed squared distance to any point inside the box.
    fn min_dist2(&self, q: &[f64]) -> f64 {
        let (lo, hi) = self.bounds();
        q.iter()
            .zip(lo.iter().zip(hi))
            .map(|(&v, (&l, &h))| {
                let gap = if v < l {
                    l - v
                } else if v > h {
                    v - h
                } else {
                    0.0
                };
                gap * gap
            })
            .sum()
    }
}

struct KdTree<'a> {
    x: ArrayView2<'a, f64>,
    root: Node,
}

impl<'a> KdTree<'a> {
    fn build(x: ArrayView2<'a, f64>) -> Self {
        let mut idx: Vec<usize> = (0..x.nrows()).collect();
        let root = Self::build_node(&x, &mut idx);
        KdTree { x, root }
    }

    fn build_node(x: &ArrayView2<f64>, idx: &mut [usize]) -> Node {
        let d = x.ncols();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in idx.iter() {
            for j in 0..d {
                let v = x[[i, j]];
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let (axis, spread) =
            (0..d)
                .map(|j| (j, hi[j] - lo[j]))
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, c| if c.1 > best.1 { c } else { best },
                );
        if idx.len() <= LEAF_SIZE || spread <= 0.0 {
            return Node::Leaf {
                lo,
                hi,
                points: idx.to_vec(),
            };
        }
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| x[[a, axis]].total_cmp(&x[[b, axis]]));
        let (left, right) = idx.split_at_mut(mid);
        Node::Split {
            lo,
            hi,
            left: Box::new(Self::build_node(x, left)),
            right: Box::new(Self::build_node(x, right)),
        }
    }

    fn query(&self, query: usize, k: usize) -> Vec<Candidate> {
        let q = self.x.row(query);
        let q = q.as_slice().expect("standard layout");
        let mut best = KBest::new(k);
        self.search(&self.root, q, query, &mut best);
        best.into_sorted()
    }

    fn search(&self, node: &Node, q: &[f64], query: usize, best: &mut KBest) {
        match node {
            Node::Leaf { points, .. } => {
                for &p in points {
                    if p == query {
                        continue;
                    }
                    let row = self.x.row(p);
                    best.offer(Candidate {
                        dist2: squared_euclidean(q, row.as_slice().expect("standard layout")),
                        index: p,
                    });
                }
            }
            Node::Split { left, right, .. } => {
                let dl = left.min_dist2(q);
                let dr = right.min_dist2(q);
                let (first, d1, second, d2) = if dl <= dr {
                    (left, dl, right, dr)
                } else {
                    (right, dr, left, dl)
                };
                // equal bounds are still explored: a tie may win on index
                if d1 <= best.bound() {
                    self.search(first, q, query, best);
                }
                if d2 <= best.bound() {
                    self.search(second, q, query, best);
                }
            }
        }
    }
}

fn brute_force_row(x: &ArrayView2<f64>, query: usize, k: usize) -> Vec<Candidate> {
    let q = x.row(query);
    let q = q.as_slice().expect("standard layout");
    let mut best = KBest::new(k);
    for (p, row) in x.rows().into_iter().enumerate() {
        if p != query {
            best.offer(Candidate {
                dist2: squared_euclidean(q, row.as_slice().expect("standard layout")),
                index: p,
            });
        }
    }
    best.into_sorted()
}

fn assemble(n: usize, k: usize, rows: Vec<Vec<Candidate>>) -> NeighborTable {
    let mut indices = Array2::zeros((n, k));
    let mut distances = Array2::zeros((n, k));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, c) in row.into_iter().enumerate() {
            indices[[i, j]] = c.index;
            distances[[i, j]] = c.dist2.sqrt();
        }
    }
    NeighborTable {
        k,
        indices,
        distances,
    }
}

fn check_k(n: usize, k_max: usize) -> Result<()> {
    if k_max == 0 || k_max >= n {
        return Err(Error::KOutOfRange { k: k_max, n });
    }
    Ok(())
}

/// Builds the exact `k_max`-nearest-neighbor table of every sample.
pub fn build_neighbor_table(x: &Array2<f64>, k_max: usize) -> Result<NeighborTable> {
    let n = x.nrows();
    check_k(n, k_max)?;
    let x = x.as_standard_layout();
    let view = x.view();
    let rows: Vec<Vec<Candidate>> = if view.ncols() <= KD_TREE_MAX_DIM {
        let tree = KdTree::build(view);
        (0..n)
            .into_par_iter()
            .map(|i| tree.query(i, k_max))
            .collect()
    } else {
        (0..n)
            .into_par_iter()
            .map(|i| brute_force_row(&view, i, k_max))
            .collect()
    };
    Ok(assemble(n, k_max, rows))
}

/// Brute-force table, bypassing the spatial index regardless of dimension.
pub fn build_neighbor_table_brute(x: &Array2<f64>, k_max: usize) -> Result<NeighborTable> {
    let n = x.nrows();
    check_k(n, k_max)?;
    let x = x.as_standard_layout();
    let view = x.view();
    let rows = (0..n)
        .into_par_iter()
        .map(|i| brute_force_row(&view, i, k_max))
        .collect();
    Ok(assemble(n, k_max, rows))
}
