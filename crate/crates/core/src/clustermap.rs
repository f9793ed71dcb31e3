//! Two-way average-linkage clustering of an AUC matrix with Pearson
//! distance, optimal leaf ordering and SVG rendering.

use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::AucMatrix;
use crate::error::{Error, Result};

/// `1 - pearson(row_i, row_j)`, clamped to `[0, 2]`.
pub fn pearson_distance_matrix(rows: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, m) = rows.dim();
    let mut centered = Vec::with_capacity(n);
    for (i, row) in rows.rows().into_iter().enumerate() {
        let mean = row.sum() / m as f64;
        let c: Vec<f64> = row.iter().map(|v| v - mean).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVariance(i));
        }
        centered.push(c.into_iter().map(|v| v / norm).collect::<Vec<f64>>());
    }
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let r: f64 = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum();
            let v = (1.0 - r).clamp(0.0, 2.0);
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    Ok(d)
}

/// One agglomeration step. Leaves are nodes `0..n`; merge `t` creates node
/// `n + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.merges.len() + 1
    }

    pub fn root(&self) -> usize {
        2 * self.merges.len()
    }

    /// Children of an internal node, `None` for a leaf.
    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        let n = self.n_leaves();
        (node >= n).then(|| {
            let m = &self.merges[node - n];
            (m.a, m.b)
        })
    }

    /// Leaves under `node`, left subtree first.
    pub fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            match self.children(v) {
                None => out.push(v),
                Some((a, b)) => {
                    stack.push(b);
                    stack.push(a);
                }
            }
        }
        out
    }

    pub fn to_json(&self, order: &[usize]) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            labels: &'a [String],
            merges: &'a [Merge],
            leaf_order: Vec<&'a str>,
            clusters: [Vec<&'a str>; 2],
        }
        let (first, second) = two_cluster_cut(self);
        let names = |ids: &[usize]| ids.iter().map(|&i| self.labels[i].as_str()).collect();
        Ok(serde_json::to_string_pretty(&Doc {
            labels: &self.labels,
            merges: &self.merges,
            leaf_order: names(order),
            clusters: [names(&first), names(&second)],
        })?)
    }
}

/// UPGMA. Ties merge the pair with the lexicographically smallest
/// `(smaller id, larger id)`.
pub fn average_linkage(dist: &Array2<f64>, labels: Vec<String>) -> Result<Dendrogram> {
    let n = dist.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: n,
        });
    }
    if dist.ncols() != n || labels.len() != n {
        return Err(Error::InvalidParameter(
            "distance matrix must be square and labelled".into(),
        ));
    }
    // distances indexed by node id
    let total = 2 * n - 1;
    let mut d = Array2::<f64>::from_elem((total, total), f64::INFINITY);
    for i in 0..n {
        for j in 0..n {
            d[[i, j]] = dist[[i, j]];
        }
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; total];
    let mut merges = Vec::with_capacity(n - 1);
    for t in 0..n - 1 {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let v = d[[a, b]];
                if v < best.2 {
                    best = (a, b, v);
                }
            }
        }
        let (a, b, height) = best;
        let new = n + t;
        size[new] = size[a] + size[b];
        active.retain(|&c| c != a && c != b);
        for &c in &active {
            let v = (size[a] as f64 * d[[a, c]] + size[b] as f64 * d[[b, c]]) / size[new] as f64;
            d[[new, c]] = v;
            d[[c, new]] = v;
        }
        active.push(new);
        merges.push(Merge {
            a,
            b,
            height,
            size: size[new],
        });
    }
    Ok(Dendrogram { labels, merges })
}

/// Leaf sets of the two subtrees joined by the final merge, each ascending.
pub fn two_cluster_cut(dend: &Dendrogram) -> (Vec<usize>, Vec<usize>) {
    match dend.children(dend.root()) {
        None => (vec![0], Vec::new()),
        Some((a, b)) => {
            let mut first = dend.leaves(a);
            let mut second = dend.leaves(b);
            first.sort_unstable();
            second.sort_unstable();
            (first, second)
        }
    }
}

/// Sum of distances between neighbors in `order`.
pub fn ordering_cost(order: &[usize], dist: &Array2<f64>) -> f64 {
    order.windows(2).map(|w| dist[[w[0], w[1]]]).sum()
}

/// Dendrogram-consistent leaf order minimizing [`ordering_cost`], by the
/// exact dynamic program over (leftmost, rightmost) leaf pairs of each
/// subtree. Among equal costs the first candidate in unflipped left-to-right
/// enumeration wins.
pub fn optimal_leaf_order(dend: &Dendrogram, dist: &Array2<f64>) -> Vec<usize> {
    let n = dend.n_leaves();
    let total = 2 * n - 1;
    let mut leaves: Vec<Vec<usize>> = vec![Vec::new(); total];
    // side[v][leaf]: 0 if leaf in left child of v, 1 if in right
    let mut owner = vec![usize::MAX; n * total];
    for (v, slot) in leaves.iter_mut().enumerate() {
        *slot = dend.leaves(v);
    }
    for v in n..total {
        let (a, _) = dend.children(v).expect("internal node");
        for &leaf in &leaves[v] {
            owner[v * n + leaf] = usize::from(!leaves[a].contains(&leaf));
        }
    }
    // cost[i][j]: best cost of the subtree LCA(i, j) ordered from i to j
    let mut cost = Array2::<f64>::zeros((n, n));
    let mut via = vec![(0usize, 0usize); n * n];
    let ends = |node: usize, start: usize, owner: &[usize]| -> Vec<usize> {
        if node < n {
            vec![start]
        } else {
            let s = owner[node * n + start];
            leaves[node]
                .iter()
                .copied()
                .filter(|&l| owner[node * n + l] != s)
                .collect()
        }
    };
    for v in n..total {
        let (a, b) = dend.children(v).expect("internal node");
        for &i in &leaves[a] {
            let left_ends = ends(a, i, &owner);
            for &j in &leaves[b] {
                let right_ends = ends(b, j, &owner);
                let mut best = (f64::INFINITY, (0, 0));
                for &h in &left_ends {
                    let left = if a < n { 0.0 } else { cost[[i, h]] };
                    for &m in &right_ends {
                        let right = if b < n { 0.0 } else { cost[[m, j]] };
                        let c = left + dist[[h, m]] + right;
                        if c < best.0 {
                            best = (c, (h, m));
                        }
                    }
                }
                cost[[i, j]] = best.0;
                cost[[j, i]] = best.0;
                via[i * n + j] = best.1;
                via[j * n + i] = (best.1 .1, best.1 .0);
            }
        }
    }
    let root = dend.root();
    let (a, b) = dend.children(root).expect("root is internal");
    let mut best = (f64::INFINITY, 0, 0);
    for &i in &leaves[a] {
        for &j in &leaves[b] {
            if cost[[i, j]] < best.0 {
                best = (cost[[i, j]], i, j);
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    emit(dend, &owner, &via, root, best.1, best.2, &mut out);
    out
}

/// Appends the leaves of `node` ordered from `i` to `j`.
fn emit(
    dend: &Dendrogram,
    owner: &[usize],
    via: &[(usize, usize)],
    node: usize,
    i: usize,
    j: usize,
    out: &mut Vec<usize>,
) {
    let n = dend.n_leaves();
    let Some((a, b)) = dend.children(node) else {
        out.push(i);
        return;
    };
    let (h, m) = via[i * n + j];
    let (first, second) = if owner[node * n + i] == 0 {
        (a, b)
    } else {
        (b, a)
    };
    emit(dend, owner, via, first, i, h, out);
    emit(dend, owner, via, second, m, j, out);
}

/// Clustering of one side (rows or columns) of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSide {
    pub dendrogram: Dendrogram,
    pub order: Vec<usize>,
    pub distances: Array2<f64>,
}

impl ClusterSide {
    pub fn new(rows: &Array2<f64>, labels: Vec<String>) -> Result<Self> {
        let distances = pearson_distance_matrix(rows)?;
        let dendrogram = average_linkage(&distances, labels)?;
        let order = optimal_leaf_order(&dendrogram, &distances);
        Ok(ClusterSide {
            dendrogram,
            order,
            distances,
        })
    }

    /// Names in the two clusters of the final merge.
    pub fn cut_names(&self) -> (Vec<String>, Vec<String>) {
        let (a, b) = two_cluster_cut(&self.dendrogram);
        let names = |ids: Vec<usize>| {
            ids.into_iter()
                .map(|i| self.dendrogram.labels[i].clone())
                .collect()
        };
        (names(a), names(b))
    }
}

/// Algorithm-side and dataset-side clusterings of the raw AUC matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMap {
    pub algorithms: ClusterSide,
    pub datasets: ClusterSide,
}

pub fn cluster_map(auc: &AucMatrix) -> Result<ClusterMap> {
    Ok(ClusterMap {
        algorithms: ClusterSide::new(&auc.values, auc.algorithms.clone())?,
        datasets: ClusterSide::new(&auc.values.t().to_owned(), auc.datasets.clone())?,
    })
}

const CELL: f64 = 14.0;
const TREE_DEPTH: f64 = 90.0;
const LABEL_SPACE: f64 = 110.0;

fn heat_color(v: f64, lo: f64, hi: f64) -> String {
    let t = if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    // dark blue through white to dark red
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (30.0 + 225.0 * s, 60.0 + 195.0 * s, 150.0 + 105.0 * s)
    } else {
        let s = (t - 0.5) / 0.5;
        (255.0 - 75.0 * s, 255.0 - 225.0 * s, 255.0 - 225.0 * s)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// Line segments of a dendrogram in leaf-position/height coordinates.
fn tree_segments(side: &ClusterSide) -> Vec<(f64, f64, f64, f64)> {
    let dend = &side.dendrogram;
    let n = dend.n_leaves();
    let mut pos = vec![0.0; 2 * n - 1];
    let mut height = vec![0.0; 2 * n - 1];
    for (p, &leaf) in side.order.iter().enumerate() {
        pos[leaf] = p as f64 + 0.5;
    }
    let mut segments = Vec::new();
    for (t, m) in dend.merges.iter().enumerate() {
        let v = n + t;
        pos[v] = (pos[m.a] + pos[m.b]) / 2.0;
        height[v] = m.height;
        segments.push((pos[m.a], height[m.a], pos[m.a], m.height));
        segments.push((pos[m.b], height[m.b], pos[m.b], m.height));
        segments.push((pos[m.a], m.height, pos[m.b], m.height));
    }
    segments
}

/// Heatmap of the matrix in optimal leaf order with both dendrograms.
pub fn clustermap_svg(auc: &AucMatrix, map: &ClusterMap) -> String {
    let rows = &map.algorithms.order;
    let cols = &map.datasets.order;
    let x0 = TREE_DEPTH;
    let y0 = TREE_DEPTH;
    let width = x0 + cols.len() as f64 * CELL + LABEL_SPACE;
    let height = y0 + rows.len() as f64 * CELL + LABEL_SPACE;
    let (lo, hi) = auc
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="9">"#
    );
    for (r, &a) in rows.iter().enumerate() {
        for (c, &d) in cols.iter().enumerate() {
            let v = auc.values[[a, d]];
            let _ = writeln!(
                svg,
                r#"<rect x="{:.1}" y="{:.1}" width="{CELL}" height="{CELL}" fill="{}"><title>{} / {}: {:.3}</title></rect>"#,
                x0 + c as f64 * CELL,
                y0 + r as f64 * CELL,
                heat_color(v, lo, hi),
                auc.algorithms[a],
                auc.datasets[d],
                v
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            x0 + cols.len() as f64 * CELL + 4.0,
            y0 + (r as f64 + 0.75) * CELL,
            auc.algorithms[a]
        );
    }
    for (c, &d) in cols.iter().enumerate() {
        let x = x0 + (c as f64 + 0.75) * CELL;
        let y = y0 + rows.len() as f64 * CELL + 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{y:.1}" transform="rotate(90 {x:.1} {y:.1})">{}</text>"#,
            auc.datasets[d]
        );
    }
    let scale = |side: &ClusterSide| {
        let top = side.dendrogram.merges.last().map_or(1.0, |m| m.height);
        if top > 0.0 {
            (TREE_DEPTH - 6.0) / top
        } else {
            0.0
        }
    };
    let s = scale(&map.datasets);
    for (p1, h1, p2, h2) in tree_segments(&map.datasets) {
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="0.8"/>"#,
            x0 + p1 * CELL,
            y0 - h1 * s,
            x0 + p2 * CELL,
            y0 - h2 * s
        );
    }
    let s = scale(&map.algorithms);
    for (p1, h1, p2, h2) in tree_segments(&map.algorithms) {
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="0.8"/>"#,
            x0 - h1 * s,
            y0 + p1 * CELL,
            x0 - h2 * s,
            y0 + p2 * CELL
        );
    }
    svg.push_str("</svg>\n");
    svg
}
