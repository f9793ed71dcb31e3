//! Input generators shared by the criterion benchmarks.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `n x d` standard normal matrix from a fixed seed.
pub fn gaussian_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
}

/// Gaussian blob with the last `anomalies` rows pushed far out, plus labels.
pub fn labelled_blob(n: usize, d: usize, anomalies: usize, seed: u64) -> (Array2<f64>, Vec<u8>) {
    let mut x = gaussian_matrix(n, d, seed);
    let mut labels = vec![0u8; n];
    for i in n - anomalies..n {
        x.row_mut(i).mapv_inplace(|v| v * 0.5 + 6.0);
    }
    labels[n - anomalies..].fill(1);
    (x, labels)
}
