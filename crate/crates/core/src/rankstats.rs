//! Friedman ranks, the Iman-Davenport omnibus statistic, Nemenyi post-hoc
//! p-values and the pairwise significance summary.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::data::AucMatrix;
use crate::error::{Error, Result};
use crate::numeric::{average_ranks, normal_cdf, normal_pdf};

/// Per-dataset ranks of algorithms (1 = highest AUC, ties averaged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanRanks {
    pub algorithms: Vec<String>,
    pub datasets: Vec<String>,
    /// algorithms x datasets
    pub ranks: Array2<f64>,
    pub mean_ranks: Vec<f64>,
}

impl FriedmanRanks {
    pub fn n_algorithms(&self) -> usize {
        self.algorithms.len()
    }

    pub fn n_datasets(&self) -> usize {
        self.datasets.len()
    }
}

pub fn friedman_ranks(auc: &AucMatrix) -> Result<FriedmanRanks> {
    let (k, n) = auc.values.dim();
    if k < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: k,
        });
    }
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: n,
        });
    }
    for ((a, d), v) in auc.values.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::IncompleteMatrix {
                algorithm: auc.algorithms[a].clone(),
                dataset: auc.datasets[d].clone(),
            });
        }
    }
    let mut ranks = Array2::zeros((k, n));
    for (d, col) in auc.values.columns().into_iter().enumerate() {
        // descending: rank of -AUC ascending
        let negated: Vec<f64> = col.iter().map(|v| -v).collect();
        for (a, r) in average_ranks(&negated).into_iter().enumerate() {
            ranks[[a, d]] = r;
        }
    }
    let mean_ranks = ranks
        .rows()
        .into_iter()
        .map(|r| r.sum() / n as f64)
        .collect();
    Ok(FriedmanRanks {
        algorithms: auc.algorithms.clone(),
        datasets: auc.datasets.clone(),
        ranks,
        mean_ranks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImanDavenport {
    pub chi_square: f64,
    pub statistic: f64,
    pub df_numerator: f64,
    pub df_denominator: f64,
}

impl ImanDavenport {
    /// Upper `alpha` quantile of the F distribution with the statistic's
    /// degrees of freedom.
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        f_critical_value(alpha, self.df_numerator, self.df_denominator)
    }
}

/// `F_F = (N-1) chi2 / (N(k-1) - chi2)` with the Friedman
/// `chi2 = 12N/(k(k+1)) [sum R_j^2 - k(k+1)^2/4]`.
pub fn iman_davenport(ranks: &FriedmanRanks) -> Result<ImanDavenport> {
    let k = ranks.n_algorithms() as f64;
    let n = ranks.n_datasets() as f64;
    let sum_sq: f64 = ranks.mean_ranks.iter().map(|r| r * r).sum();
    let chi_square = 12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0).powi(2) / 4.0);
    let denominator = n * (k - 1.0) - chi_square;
    if denominator <= 1e-12 * n * (k - 1.0) {
        return Err(Error::StatisticSaturated);
    }
    Ok(ImanDavenport {
        chi_square,
        statistic: (n - 1.0) * chi_square / denominator,
        df_numerator: k - 1.0,
        df_denominator: (k - 1.0) * (n - 1.0),
    })
}

pub fn f_critical_value(alpha: f64, df1: f64, df2: f64) -> Result<f64> {
    let dist = FisherSnedecor::new(df1, df2).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(dist.inverse_cdf(1.0 - alpha))
}

const GL_ORDER: usize = 20;
const INTEGRATION_LIMIT: f64 = 8.5;
const INTEGRATION_TOLERANCE: f64 = 1e-10;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre polynomial.
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut rule = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut derivative = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                derivative = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / derivative;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            rule.push((x, 2.0 / ((1.0 - x * x) * derivative * derivative)));
        }
        rule
    })
}

fn gl_integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    half * gauss_legendre()
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
    let m = (a + b) / 2.0;
    let left = gl_integrate(f, a, m);
    let right = gl_integrate(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= tol {
        left + right
    } else {
        adaptive(f, a, m, left, tol / 2.0, depth - 1)
            + adaptive(f, m, b, right, tol / 2.0, depth - 1)
    }
}

/// `Phi(z) - Phi(z - q)` without cancellation in the upper tail.
fn normal_interval(z: f64, q: f64) -> f64 {
    if z - q / 2.0 > 0.0 {
        normal_cdf(q - z) - normal_cdf(-z)
    } else {
        normal_cdf(z) - normal_cdf(z - q)
    }
}

/// CDF of the range of `k` standard normal samples (studentized range with
/// infinite degrees of freedom):
/// `k * integral phi(z) [Phi(z) - Phi(z - q)]^(k-1) dz`.
pub fn studentized_range_cdf(q: f64, k: usize) -> f64 {
    if q <= 0.0 || k < 2 {
        return 0.0;
    }
    let f = |z: f64| k as f64 * normal_pdf(z) * normal_interval(z, q).powi(k as i32 - 1);
    let (a, b) = (-INTEGRATION_LIMIT, INTEGRATION_LIMIT);
    let whole = gl_integrate(&f, a, b);
    adaptive(&f, a, b, whole, INTEGRATION_TOLERANCE, 30).clamp(0.0, 1.0)
}

/// Inverse of [`studentized_range_cdf`] by bisection.
pub fn studentized_range_quantile(p: f64, k: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 20.0);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if studentized_range_cdf(mid, k) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    (lo + hi) / 2.0
}

/// Nemenyi p-value for a mean-rank difference among `k` algorithms on
/// `n` datasets.
pub fn nemenyi_p_value(rank_difference: f64, k: usize, n: usize) -> f64 {
    let se = ((k * (k + 1)) as f64 / (12.0 * n as f64)).sqrt();
    let q = rank_difference.abs() / se;
    (1.0 - studentized_range_cdf(q, k)).clamp(0.0, 1.0)
}

/// Symmetric matrix of pairwise Nemenyi p-values, diagonal 1.
pub fn nemenyi_pairwise(ranks: &FriedmanRanks) -> Array2<f64> {
    let k = ranks.n_algorithms();
    let n = ranks.n_datasets();
    let mut p = Array2::ones((k, k));
    for i in 0..k {
        for j in (i + 1)..k {
            let v = nemenyi_p_value(ranks.mean_ranks[i] - ranks.mean_ranks[j], k, n);
            p[[i, j]] = v;
            p[[j, i]] = v;
        }
    }
    p
}

/// Display range for p-values; stored values are not clamped.
pub fn display_p_value(p: f64) -> f64 {
    p.clamp(0.001, 0.9)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub algorithms: Vec<String>,
    pub mean_ranks: Vec<f64>,
    pub mean_auc: Vec<f64>,
    pub iman_davenport: ImanDavenport,
    pub f_critical_05: f64,
    pub nemenyi_p: Array2<f64>,
}

pub fn rank_summary(auc: &AucMatrix) -> Result<RankSummary> {
    let ranks = friedman_ranks(auc)?;
    let id = iman_davenport(&ranks)?;
    Ok(RankSummary {
        algorithms: ranks.algorithms.clone(),
        mean_ranks: ranks.mean_ranks.clone(),
        mean_auc: auc.mean_auc(),
        f_critical_05: id.critical_value(0.05)?,
        iman_davenport: id,
        nemenyi_p: nemenyi_pairwise(&ranks),
    })
}

pub const STRONG_LEVEL: f64 = 0.05;
pub const WEAK_LEVEL: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mark {
    Blank,
    /// row better, p <= 0.05
    StrongBetter,
    /// row better, p <= 0.10
    WeakBetter,
    WeakWorse,
    StrongWorse,
}

impl Mark {
    pub fn symbol(self) -> &'static str {
        match self {
            Mark::Blank => "",
            Mark::StrongBetter => "++",
            Mark::WeakBetter => "+",
            Mark::WeakWorse => "-",
            Mark::StrongWorse => "--",
        }
    }

    pub fn is_better(self) -> bool {
        matches!(self, Mark::StrongBetter | Mark::WeakBetter)
    }
}

/// Pairwise significance marks: rows by descending mean AUC, columns by
/// ascending mean AUC, keeping only columns some row beats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceTable {
    pub rows: Vec<String>,
    pub row_mean_auc: Vec<f64>,
    pub columns: Vec<String>,
    pub marks: Vec<Vec<Mark>>,
}

impl SignificanceTable {
    pub fn count(&self, row: &str, mark: Mark) -> usize {
        self.rows
            .iter()
            .position(|r| r == row)
            .map_or(0, |i| self.marks[i].iter().filter(|&&m| m == mark).count())
    }

    pub fn to_ascii(&self) -> String {
        let name_width = self.rows.iter().map(String::len).max().unwrap_or(0).max(9);
        let widths: Vec<usize> = self.columns.iter().map(|c| c.len().max(2)).collect();
        let mut out = String::new();
        let _ = write!(out, "{:<name_width$} {:>8}", "algorithm", "mean AUC");
        for (c, w) in self.columns.iter().zip(&widths) {
            let _ = write!(out, " {c:>w$}");
        }
        out.push('\n');
        for ((row, auc), marks) in self.rows.iter().zip(&self.row_mean_auc).zip(&self.marks) {
            let _ = write!(out, "{row:<name_width$} {auc:>8.3}");
            for (m, w) in marks.iter().zip(&widths) {
                let _ = write!(out, " {:>w$}", m.symbol());
            }
            out.push('\n');
        }
        out
    }
}

pub fn significance_table(
    ranks: &FriedmanRanks,
    p: &Array2<f64>,
    mean_auc: &[f64],
) -> SignificanceTable {
    let k = ranks.n_algorithms();
    let mark = |i: usize, j: usize| {
        let pv = p[[i, j]];
        let better = ranks.mean_ranks[i] < ranks.mean_ranks[j];
        let worse = ranks.mean_ranks[i] > ranks.mean_ranks[j];
        match () {
            _ if i == j => Mark::Blank,
            _ if better && pv <= STRONG_LEVEL => Mark::StrongBetter,
            _ if better && pv <= WEAK_LEVEL => Mark::WeakBetter,
            _ if worse && pv <= STRONG_LEVEL => Mark::StrongWorse,
            _ if worse && pv <= WEAK_LEVEL => Mark::WeakWorse,
            _ => Mark::Blank,
        }
    };
    let mut rows: Vec<usize> = (0..k).collect();
    rows.sort_by(|&a, &b| mean_auc[b].total_cmp(&mean_auc[a]).then(a.cmp(&b)));
    let mut columns: Vec<usize> = (0..k).collect();
    columns.sort_by(|&a, &b| mean_auc[a].total_cmp(&mean_auc[b]).then(a.cmp(&b)));
    columns.retain(|&j| (0..k).any(|i| mark(i, j).is_better()));
    SignificanceTable {
        rows: rows.iter().map(|&i| ranks.algorithms[i].clone()).collect(),
        row_mean_auc: rows.iter().map(|&i| mean_auc[i]).collect(),
        columns: columns
            .iter()
            .map(|&j| ranks.algorithms[j].clone())
            .collect(),
        marks: rows
            .iter()
            .map(|&i| columns.iter().map(|&j| mark(i, j)).collect())
            .collect(),
    }
}

/// `algorithm,mean_rank,mean_auc` rows.
pub fn ranks_to_csv(ranks: &FriedmanRanks, mean_auc: &[f64]) -> String {
    let mut out = String::from("algorithm,mean_rank,mean_auc\n");
    for ((a, r), m) in ranks.algorithms.iter().zip(&ranks.mean_ranks).zip(mean_auc) {
        let _ = writeln!(out, "{a},{r},{m}");
    }
    out
}

/// A labelled square matrix, header `algorithm,<names>`; values are written
/// in shortest round-trip form.
pub fn square_matrix_to_csv(names: &[String], m: &Array2<f64>) -> String {
    let mut out = String::from("algorithm");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (n, row) in names.iter().zip(m.rows()) {
        out.push_str(n);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn square_matrix_from_csv(text: &str, origin: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader
        .headers()?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let k = names.len();
    let mut flat = Vec::with_capacity(k * k);
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != k + 1 || i >= k || record[0] != names[i] {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                message: format!("row {} does not match the header", i + 1),
            });
        }
        for field in record.iter().skip(1) {
            flat.push(field.parse::<f64>().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                message: format!("not a number: `{field}`"),
            })?);
        }
    }
    let m = Array2::from_shape_vec((k, k), flat).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((names, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn matrix(values: Array2<f64>) -> AucMatrix {
        let (k, n) = values.dim();
        AucMatrix::new(
            (0..k).map(|i| format!("a{i}")).collect(),
            (0..n).map(|i| format!("d{i}")).collect(),
            values,
        )
        .unwrap()
    }

    #[test]
    fn two_by_two_hand_ranks() {
        let r = friedman_ranks(&matrix(array![[0.9, 0.8], [0.7, 0.85]])).unwrap();
        assert_eq!(r.mean_ranks, vec![1.5, 1.5]);
    }

    #[test]
    fn all_tied_gives_zero_statistic() {
        let r = friedman_ranks(&matrix(Array2::from_elem((3, 4), 0.7))).unwrap();
        assert!(r.mean_ranks.iter().all(|&m| m == 2.0));
        assert_eq!(iman_davenport(&r).unwrap().statistic, 0.0);
    }

    #[test]
    fn total_separation_saturates() {
        let r = friedman_ranks(&matrix(array![[0.9, 0.9, 0.9], [0.5, 0.5, 0.5]])).unwrap();
        assert!(matches!(iman_davenport(&r), Err(Error::StatisticSaturated)));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let v = gl_integrate(&|x: f64| x.powi(6), -1.0, 1.0);
        assert!((v - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn two_groups_reduce_to_normal() {
        for q in [0.1, 0.5, 1.0, 2.0, 2.772, 4.0] {
            let expected = 2.0 * normal_cdf(q / std::f64::consts::SQRT_2) - 1.0;
            assert!((studentized_range_cdf(q, 2) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn known_quantiles() {
        // upper 5% points of the range of k normals
        assert!((studentized_range_quantile(0.95, 3) - 3.314).abs() < 1e-3);
        assert!((studentized_range_quantile(0.95, 10) - 4.474).abs() < 1e-3);
    }

    #[test]
    fn square_matrix_round_trip() {
        let names = vec!["x".to_string(), "y".to_string()];
        let m = array![[1.0, 0.123456789012345], [0.123456789012345, 1.0]];
        let text = square_matrix_to_csv(&names, &m);
        let (n2, m2) = square_matrix_from_csv(&text, Path::new("mem")).unwrap();
        assert_eq!((n2, m2), (names, m));
    }
}
