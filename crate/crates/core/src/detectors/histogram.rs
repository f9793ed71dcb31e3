//! Histogram detectors: HBOS and LODA, with the Birgé-Rozenholc rule for
//! choosing the number of equal-width bins.

use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::ScoreVector;
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::seed::stream_rng;

/// Density floor inside logarithms.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Bin count maximizing the penalized log-likelihood of the equal-width
/// histogram, `L(D) - (D - 1 + ln(D)^2.5)`, over `D = 1..=max(n / ln n, 2)`.
pub fn birge_rozenholc_bins(x: &[f64]) -> usize {
    let n = x.len();
    if n < 2 {
        return 1;
    }
    let (lo, hi) = min_max(x);
    if hi <= lo {
        return 1;
    }
    let d_max = ((n as f64 / (n as f64).ln()).floor() as usize).max(2);
    let mut best = (1, f64::NEG_INFINITY);
    for d in 1..=d_max {
        let value = penalized_likelihood(x, lo, hi, d);
        if value > best.1 {
            best = (d, value);
        }
    }
    best.0
}

/// `sum_j N_j ln(D N_j / n) - (D - 1 + ln(D)^2.5)`; the range term is shared by
/// all `D` and omitted.
pub(crate) fn penalized_likelihood(x: &[f64], lo: f64, hi: f64, bins: usize) -> f64 {
    let counts = bin_counts(x, lo, hi, bins);
    let n = x.len() as f64;
    let d = bins as f64;
    let likelihood: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 * (d * c as f64 / n).ln())
        .sum();
    likelihood - (d - 1.0 + d.ln().powf(2.5))
}

fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

fn bin_index(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    let pos = ((v - lo) / (hi - lo) * bins as f64).floor();
    (pos.max(0.0) as usize).min(bins - 1)
}

fn bin_counts(x: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &v in x {
        counts[bin_index(v, lo, hi, bins)] += 1;
    }
    counts
}

/// An equal-width histogram over `[min, max]` of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub counts: Vec<usize>,
    pub n: usize,
}

impl Histogram {
    /// Fits a histogram with the Birgé-Rozenholc bin count.
    pub fn fit(x: &[f64]) -> Self {
        let bins = birge_rozenholc_bins(x);
        Self::with_bins(x, bins)
    }

    pub fn with_bins(x: &[f64], bins: usize) -> Self {
        let (min, max) = min_max(x);
        Histogram {
            min,
            max,
            counts: bin_counts(x, min, max, bins.max(1)),
            n: x.len(),
        }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.n as f64)
            .collect()
    }

    /// Probability density at `v`; zero outside `[min, max]`. A degenerate
    /// histogram (zero width) puts density 1 on its single value.
    pub fn density(&self, v: f64) -> f64 {
        if v < self.min || v > self.max {
            return 0.0;
        }
        let p = self.counts[bin_index(v, self.min, self.max, self.bins())] as f64 / self.n as f64;
        if self.max > self.min {
            p * self.bins() as f64 / (self.max - self.min)
        } else {
            p
        }
    }

    fn max_density(&self) -> f64 {
        let c = self.counts.iter().copied().max().unwrap_or(0) as f64 / self.n as f64;
        if self.max > self.min {
            c * self.bins() as f64 / (self.max - self.min)
        } else {
            c
        }
    }
}

/// One histogram per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramModel {
    pub features: Vec<Histogram>,
}

impl HistogramModel {
    pub fn fit(x: &Array2<f64>) -> Self {
        HistogramModel {
            features: x
                .columns()
                .into_iter()
                .map(|c| Histogram::fit(&c.to_vec()))
                .collect(),
        }
    }

    /// `sum_f -ln(density_f / max density_f + floor)`.
    pub fn score_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        self.features
            .iter()
            .zip(row.iter())
            .map(|(h, &v)| -(h.density(v) / h.max_density() + DENSITY_FLOOR).ln())
            .sum()
    }
}

pub fn hbos_score(x: &Array2<f64>) -> Result<ScoreVector> {
    if x.ncols() == 0 {
        return Err(Error::NoFeatures);
    }
    let model = HistogramModel::fit(x);
    ScoreVector::new(x.rows().into_iter().map(|r| model.score_row(r)).collect())
}

/// LODA with the default 100 projections.
pub fn loda_score(x: &Array2<f64>, seed: u64) -> Result<ScoreVector> {
    loda_score_with(x, crate::detectors::LODA_PROJECTIONS, seed)
}

/// LODA: `-mean_p ln(density_p(w_p . x) + floor)` over sparse Gaussian
/// projections with `ceil(sqrt(d))` non-zero components each.
pub fn loda_score_with(x: &Array2<f64>, n_projections: usize, seed: u64) -> Result<ScoreVector> {
    let (n, d) = x.dim();
    if d == 0 {
        return Err(Error::NoFeatures);
    }
    if n_projections == 0 {
        return Err(Error::InvalidParameter(
            "n_projections must be positive".into(),
        ));
    }
    let nonzero = ((d as f64).sqrt().ceil() as usize).min(d);
    let per_projection: Vec<Vec<f64>> = (0..n_projections)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            let mut features = sample(&mut rng, d, nonzero).into_vec();
            features.sort_unstable();
            let weights: Vec<(usize, f64)> = features
                .into_iter()
                .map(|j| (j, rng.sample(StandardNormal)))
                .collect();
            let projected: Vec<f64> = (0..n)
                .map(|i| weights.iter().map(|&(j, w)| w * x[[i, j]]).sum())
                .collect();
            let hist = Histogram::fit(&projected);
            projected
                .iter()
                .map(|&v| -(hist.density(v) + DENSITY_FLOOR).ln())
                .collect()
        })
        .collect();
    let scores = (0..n)
        .map(|i| compensated_sum(per_projection.iter().map(|s| s[i])) / n_projections as f64)
        .collect();
    ScoreVector::new(scores)
}
