//! Empirical-distribution detectors: COPOD and ECOD.
//!
//! Both start from per-feature empirical CDF tail probabilities:
//! `left = -ln F(x)` and `right = -ln F_neg(-x)` where `F` counts samples
//! `<= x`. The skewness-selected tail is the right tail for positively skewed
//! features, the left for negatively skewed ones, and the mean of both when
//! the sample skewness is exactly zero.

use ndarray::Array2;

use crate::data::ScoreVector;
use crate::error::{Error, Result};
use crate::numeric::skewness;

struct Tails {
    left: Array2<f64>,
    right: Array2<f64>,
    skew: Array2<f64>,
}

/// Fraction of the column at or below each value.
fn ecdf(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    column
        .iter()
        .map(|&v| sorted.partition_point(|&s| s <= v) as f64 / n as f64)
        .collect()
}

fn tails(x: &Array2<f64>) -> Result<Tails> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(Error::Empty("data"));
    }
    if d == 0 {
        return Err(Error::NoFeatures);
    }
    let mut left = Array2::zeros((n, d));
    let mut right = Array2::zeros((n, d));
    let mut skew = Array2::zeros((n, d));
    for j in 0..d {
        let col = x.column(j).to_vec();
        let neg: Vec<f64> = col.iter().map(|v| -v).collect();
        let l = ecdf(&col);
        let r = ecdf(&neg);
        let sign = skewness(&col).signum_or_zero();
        for i in 0..n {
            let (ul, ur) = (-l[i].ln(), -r[i].ln());
            left[[i, j]] = ul;
            right[[i, j]] = ur;
            skew[[i, j]] = match sign {
                s if s > 0.0 => ur,
                s if s < 0.0 => ul,
                _ => 0.5 * (ul + ur),
            };
        }
    }
    Ok(Tails { left, right, skew })
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// COPOD: per feature, the larger of the skewness-selected tail and the mean
/// of both tails, summed over features.
pub fn copod_score(x: &Array2<f64>) -> Result<ScoreVector> {
    let t = tails(x)?;
    let scores = (0..x.nrows())
        .map(|i| {
            (0..x.ncols())
                .map(|j| t.skew[[i, j]].max(0.5 * (t.left[[i, j]] + t.right[[i, j]])))
                .sum()
        })
        .collect();
    ScoreVector::new(scores)
}

/// ECOD: the largest of the three tail sums over features.
pub fn ecod_score(x: &Array2<f64>) -> Result<ScoreVector> {
    let t = tails(x)?;
    let scores = (0..x.nrows())
        .map(|i| {
            let l: f64 = t.left.row(i).sum();
            let r: f64 = t.right.row(i).sum();
            let s: f64 = t.skew.row(i).sum();
            l.max(r).max(s)
        })
        .collect();
    ScoreVector::new(scores)
}
