//! Density-model detectors: principal components, Gaussian kernel density and
//! Gaussian mixtures.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use ndarray::Array2;
use rayon::prelude::*;

use crate::data::ScoreVector;
use crate::detectors::cluster::plus_plus_centers;
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, log_sum_exp};
use crate::seed::rng;

/// Eigenvalues at or below this are never retained.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;
pub const GMM_REGULARIZATION: f64 = 1e-6;
pub const GMM_TOLERANCE: f64 = 1e-6;
pub const GMM_MAX_ITER: usize = 200;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn to_matrix(x: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]])
}

fn column_means(x: &Array2<f64>) -> Vec<f64> {
    x.columns()
        .into_iter()
        .map(|c| compensated_sum(c.iter().copied()) / x.nrows() as f64)
        .collect()
}

/// Sum of squared projections on the leading principal components, each
/// divided by its eigenvalue. The smallest leading set whose cumulative share
/// of the variance exceeds `variance_threshold` is retained.
pub fn pca_score(x: &Array2<f64>, variance_threshold: f64) -> Result<ScoreVector> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: n,
        });
    }
    if d == 0 {
        return Err(Error::NoFeatures);
    }
    if !(0.0..=1.0).contains(&variance_threshold) {
        return Err(Error::InvalidParameter(format!(
            "variance threshold {variance_threshold} outside [0, 1]"
        )));
    }
    let means = column_means(x);
    let mut centered = to_matrix(x);
    for (j, mean) in means.iter().enumerate() {
        centered.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let total: f64 = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > EIGENVALUE_FLOOR)
        .sum();
    if total <= 0.0 {
        return Err(Error::NoInformativeVariables);
    }
    let mut retained = Vec::new();
    let mut cumulative = 0.0;
    for &c in &order {
        let lambda = eig.eigenvalues[c];
        if lambda <= EIGENVALUE_FLOOR {
            break;
        }
        retained.push(c);
        cumulative += lambda / total;
        if cumulative > variance_threshold {
            break;
        }
    }
    let projections = &centered * &eig.eigenvectors;
    let scores = (0..n)
        .map(|i| {
            retained
                .iter()
                .map(|&c| projections[(i, c)].powi(2) / eig.eigenvalues[c])
                .sum()
        })
        .collect();
    ScoreVector::new(scores)
}

/// Per-feature Scott bandwidths `sd_f * n^(-1/(d+4))`.
pub fn scott_bandwidths(x: &Array2<f64>) -> Result<Vec<f64>> {
    let (n, d) = x.dim();
    let factor = (n as f64).powf(-1.0 / (d as f64 + 4.0));
    let means = column_means(x);
    (0..d)
        .map(|j| {
            let var = compensated_sum(x.column(j).iter().map(|v| (v - means[j]).powi(2)))
                / (n - 1) as f64;
            if var > 0.0 {
                Ok(var.sqrt() * factor)
            } else {
                Err(Error::ZeroVariance(j))
            }
        })
        .collect()
}

/// Negative log of the leave-one-out Gaussian product-kernel density.
///
/// Evaluated in log space, so scores keep their order even when densities
/// underflow.
pub fn kde_score(x: &Array2<f64>) -> Result<ScoreVector> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: n,
        });
    }
    if d == 0 {
        return Err(Error::NoFeatures);
    }
    let h = scott_bandwidths(x)?;
    let log_norm =
        -(h.iter().map(|v| v.ln()).sum::<f64>()) - 0.5 * d as f64 * LN_2PI - ((n - 1) as f64).ln();
    let scores = (0..n)
        .into_par_iter()
        .map(|i| {
            let terms: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    -0.5 * (0..d)
                        .map(|f| ((x[[i, f]] - x[[j, f]]) / h[f]).powi(2))
                        .sum::<f64>()
                })
                .collect();
            -(log_sum_exp(&terms) + log_norm)
        })
        .collect();
    ScoreVector::new(scores)
}

/// A fitted full-covariance Gaussian mixture.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    /// Covariances including the diagonal regularization.
    pub covariances: Vec<DMatrix<f64>>,
    /// Mean per-sample objective after each EM iteration.
    pub log_likelihood_history: Vec<f64>,
    pub converged: bool,
    choleskys: Vec<Cholesky<f64, Dyn>>,
}

impl GaussianMixture {
    /// Per-sample log-likelihood.
    ///
    /// Each component density carries the factor `exp(-reg/2 tr(S^-1))`, the
    /// term that makes the regularized covariance update an exact EM step, so
    /// the tracked objective never decreases.
    pub fn score_samples(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        let comps = self.component_log_densities(x)?;
        Ok(comps.iter().map(|row| log_sum_exp(row)).collect())
    }

    fn component_log_densities(&self, x: &Array2<f64>) -> Result<Vec<Vec<f64>>> {
        let d = x.ncols();
        let consts: Vec<f64> = self
            .choleskys
            .iter()
            .zip(&self.weights)
            .map(|(chol, &w)| {
                let l = chol.l_dirty();
                let log_det = 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
                let trace_inv = chol.inverse().trace();
                w.ln() - 0.5 * (d as f64 * LN_2PI + log_det) - 0.5 * GMM_REGULARIZATION * trace_inv
            })
            .collect();
        let out: Vec<Vec<f64>> = (0..x.nrows())
            .into_par_iter()
            .map(|i| {
                let xi = DVector::from_iterator(d, x.row(i).iter().copied());
                self.choleskys
                    .iter()
                    .zip(&self.means)
                    .zip(&consts)
                    .map(|((chol, mean), &c)| {
                        let diff = &xi - mean;
                        let z = chol
                            .l_dirty()
                            .solve_lower_triangular(&diff)
                            .expect("cholesky factor is invertible");
                        c - 0.5 * z.norm_squared()
                    })
                    .collect()
            })
            .collect();
        for (k, _) in self.weights.iter().enumerate() {
            if out
                .iter()
                .any(|row| !row[k].is_finite() && row[k] != f64::NEG_INFINITY)
            {
                return Err(Error::EmDiverged { component: k });
            }
        }
        Ok(out)
    }

    fn m_step(x: &Array2<f64>, resp: &[Vec<f64>], n_components: usize) -> Result<Self> {
        let (n, d) = x.dim();
        let mut weights = Vec::with_capacity(n_components);
        let mut means = Vec::with_capacity(n_components);
        let mut covariances = Vec::with_capacity(n_components);
        let mut choleskys = Vec::with_capacity(n_components);
        for k in 0..n_components {
            let nk = compensated_sum(resp.iter().map(|r| r[k])) + 10.0 * f64::EPSILON;
            let mut mean = DVector::zeros(d);
            for (i, r) in resp.iter().enumerate() {
                for j in 0..d {
                    mean[j] += r[k] * x[[i, j]];
                }
            }
            mean /= nk;
            let mut cov = DMatrix::zeros(d, d);
            for (i, r) in resp.iter().enumerate() {
                if r[k] == 0.0 {
                    continue;
                }
                let diff = DVector::from_iterator(d, (0..d).map(|j| x[[i, j]] - mean[j]));
                cov.ger(r[k], &diff, &diff, 1.0);
            }
            cov /= nk;
            for j in 0..d {
                cov[(j, j)] += GMM_REGULARIZATION;
            }
            let chol = Cholesky::new(cov.clone()).ok_or(Error::EmDiverged { component: k })?;
            weights.push(nk / n as f64);
            means.push(mean);
            covariances.push(cov);
            choleskys.push(chol);
        }
        Ok(GaussianMixture {
            weights,
            means,
            covariances,
            log_likelihood_history: Vec::new(),
            converged: false,
            choleskys,
        })
    }
}

/// EM for a full-covariance mixture; `n_components` is clamped to `n`.
///
/// Initial responsibilities are the hard assignment to the nearest of
/// `n_components` k-means++ seeds. Iterates until the mean log-likelihood
/// gains less than [`GMM_TOLERANCE`] or [`GMM_MAX_ITER`] iterations.
pub fn gmm_fit(x: &Array2<f64>, n_components: usize, seed: u64) -> Result<GaussianMixture> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: n,
        });
    }
    if d == 0 {
        return Err(Error::NoFeatures);
    }
    if n_components == 0 {
        return Err(Error::InvalidParameter(
            "n_components must be positive".into(),
        ));
    }
    let k = n_components.min(n);
    let mut rng = rng(seed);
    let centers = plus_plus_centers(x, k, &mut rng);
    let resp: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let nearest = (0..k)
                .min_by(|&a, &b| {
                    let da: f64 = (0..d)
                        .map(|j| (x[[i, j]] - x[[centers[a], j]]).powi(2))
                        .sum();
                    let db: f64 = (0..d)
                        .map(|j| (x[[i, j]] - x[[centers[b], j]]).powi(2))
                        .sum();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("k >= 1");
            (0..k)
                .map(|c| if c == nearest { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut model = GaussianMixture::m_step(x, &resp, k)?;
    let mut history = Vec::new();
    let mut previous = f64::NEG_INFINITY;
    let mut converged = false;
    for _ in 0..GMM_MAX_ITER {
        let comps = model.component_log_densities(x)?;
        let per_sample: Vec<f64> = comps.iter().map(|row| log_sum_exp(row)).collect();
        let mean_ll = compensated_sum(per_sample.iter().copied()) / n as f64;
        if !mean_ll.is_finite() {
            let component = (0..k)
                .find(|&c| comps.iter().any(|row| !row[c].is_finite()))
                .unwrap_or(0);
            return Err(Error::EmDiverged { component });
        }
        history.push(mean_ll);
        if mean_ll - previous < GMM_TOLERANCE {
            converged = true;
            break;
        }
        previous = mean_ll;
        let resp: Vec<Vec<f64>> = comps
            .iter()
            .zip(&per_sample)
            .map(|(row, &total)| row.iter().map(|&c| (c - total).exp()).collect())
            .collect();
        model = GaussianMixture::m_step(x, &resp, k)?;
    }
    model.log_likelihood_history = history;
    model.converged = converged;
    Ok(model)
}

/// Negative per-sample log-likelihood under a fitted mixture.
pub fn gmm_score(x: &Array2<f64>, n_components: usize, seed: u64) -> Result<ScoreVector> {
    let model = gmm_fit(x, n_components, seed)?;
    ScoreVector::new(model.score_samples(x)?.into_iter().map(|v| -v).collect())
}
