//! Seeded generators for eight anomaly archetypes.
//!
//! | archetype    | normals                              | anomalies                                    |
//! |--------------|--------------------------------------|----------------------------------------------|
//! | enclosed     | uniform spherical shell, radius 2-3  | Gaussian at the center, sd 0.2, radius < 0.8 |
//! | peripheral   | uniform unit box                     | one coordinate 0.1-0.3 beyond the box        |
//! | global       | standard Gaussian                    | uniform shell, radius 5-8                    |
//! | local        | Gaussians with sd 5 and sd 1         | radius 3 around the sd-1 center              |
//! | isolated     | standard Gaussian                    | single points at radius 8-12, 4 apart        |
//! | clustered    | standard Gaussian                    | sd 0.2 Gaussian centered 6 away              |
//! | univariate   | standard Gaussian                    | one coordinate 6-6.5 IQR from the median     |
//! | multivariate | equicorrelated Gaussian, rho 0.9     | 4-5 minor-axis sd off the major axis         |

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Archetype {
    Enclosed,
    Peripheral,
    Global,
    Local,
    Isolated,
    Clustered,
    Univariate,
    Multivariate,
}

impl Archetype {
    pub const ALL: [Archetype; 8] = [
        Archetype::Enclosed,
        Archetype::Peripheral,
        Archetype::Global,
        Archetype::Local,
        Archetype::Isolated,
        Archetype::Clustered,
        Archetype::Univariate,
        Archetype::Multivariate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::Enclosed => "enclosed",
            Archetype::Peripheral => "peripheral",
            Archetype::Global => "global",
            Archetype::Local => "local",
            Archetype::Isolated => "isolated",
            Archetype::Clustered => "clustered",
            Archetype::Univariate => "univariate",
            Archetype::Multivariate => "multivariate",
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Archetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Archetype::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown archetype `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeSpec {
    pub archetype: Archetype,
    pub n: usize,
    pub d: usize,
    pub contamination: f64,
    pub seed: u64,
}

impl ArchetypeSpec {
    pub fn anomaly_count(&self) -> usize {
        (self.contamination * self.n as f64).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidParameter(format!(
                "d = {} but at least 2 is required",
                self.d
            )));
        }
        if !(self.contamination > 0.0 && self.contamination < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "contamination {} outside (0, 0.5)",
                self.contamination
            )));
        }
        if self.anomaly_count() < 1 {
            return Err(Error::InvalidParameter(format!(
                "contamination {} x n {} yields no anomaly",
                self.contamination, self.n
            )));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit_direction(rng: &mut Rng, d: usize) -> Vec<f64> {
    loop {
        let g = gaussian(rng, d);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Uniform point in the shell `r_in <= |x| <= r_out`.
fn shell_point(rng: &mut Rng, d: usize, r_in: f64, r_out: f64) -> Vec<f64> {
    let u: f64 = rng.random();
    let (a, b) = (r_in.powi(d as i32), r_out.powi(d as i32));
    let r = (a + u * (b - a)).powf(1.0 / d as f64);
    unit_direction(rng, d).into_iter().map(|v| v * r).collect()
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

/// Anomaly construction constants, written to the metadata sidecar.
pub fn construction_parameters(archetype: Archetype) -> serde_json::Value {
    use serde_json::json;
    match archetype {
        Archetype::Enclosed => {
            json!({"normal_shell_radius": [2.0, 3.0], "anomaly_sd": 0.2, "anomaly_max_radius": 0.8})
        }
        Archetype::Peripheral => json!({"normal_box": [0.0, 1.0], "anomaly_overshoot": [0.1, 0.3]}),
        Archetype::Global => json!({"normal_sd": 1.0, "anomaly_shell_radius": [5.0, 8.0]}),
        Archetype::Local => {
            json!({"wide_sd": 5.0, "tight_sd": 1.0, "tight_center_offset": 10.0, "anomaly_radius_tight_sd": 3.0})
        }
        Archetype::Isolated => {
            json!({"normal_sd": 1.0, "anomaly_radius": [8.0, 12.0], "anomaly_min_separation": 4.0})
        }
        Archetype::Clustered => {
            json!({"normal_sd": 1.0, "anomaly_sd": 0.2, "anomaly_center_offset": 6.0})
        }
        Archetype::Univariate => json!({"normal_sd": 1.0, "anomaly_offset_iqr": [6.0, 6.5]}),
        Archetype::Multivariate => {
            json!({"rho": 0.9, "anomaly_minor_sd": [4.0, 5.0], "anomaly_major_sd": [-0.5, 0.5]})
        }
    }
}

/// JSON sidecar describing a generated dataset.
pub fn generation_metadata(spec: &ArchetypeSpec) -> serde_json::Value {
    serde_json::json!({
        "spec": spec,
        "anomalies": spec.anomaly_count(),
        "layout": "normal rows first, then anomalies",
        "parameters": construction_parameters(spec.archetype),
    })
}

/// Generates a labelled dataset of the requested archetype.
pub fn generate_archetype(spec: &ArchetypeSpec) -> Result<Dataset> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let n_anom = spec.anomaly_count();
    let n_norm = n - n_anom;
    let mut rng = rng(derive_seed(spec.seed, &["synth", spec.archetype.name()]));
    let rng = &mut rng;
    let mut normals: Vec<Vec<f64>> = Vec::with_capacity(n_norm);
    let mut anomalies: Vec<Vec<f64>> = Vec::with_capacity(n_anom);
    match spec.archetype {
        Archetype::Enclosed => {
            normals.extend((0..n_norm).map(|_| shell_point(rng, d, 2.0, 3.0)));
            while anomalies.len() < n_anom {
                let p = scaled(&gaussian(rng, d), 0.2);
                if p.iter().map(|v| v * v).sum::<f64>() < 0.64 {
                    anomalies.push(p);
                }
            }
        }
        Archetype::Peripheral => {
            normals.extend((0..n_norm).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()));
            for _ in 0..n_anom {
                let mut p: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let j = rng.random_range(0..d);
                let over = rng.random_range(0.1..0.3);
                p[j] = if rng.random::<bool>() {
                    -over
                } else {
                    1.0 + over
                };
                anomalies.push(p);
            }
        }
        Archetype::Global => {
            normals.extend((0..n_norm).map(|_| gaussian(rng, d)));
            anomalies.extend((0..n_anom).map(|_| shell_point(rng, d, 5.0, 8.0)));
        }
        Archetype::Local => {
            let mut tight_center = vec![0.0; d];
            tight_center[0] = 10.0;
            let n_wide = n_norm / 2;
            normals.extend((0..n_wide).map(|_| scaled(&gaussian(rng, d), 5.0)));
            normals.extend((n_wide..n_norm).map(|_| {
                gaussian(rng, d)
                    .iter()
                    .zip(&tight_center)
                    .map(|(g, c)| g + c)
                    .collect()
            }));
            anomalies.extend((0..n_anom).map(|_| {
                unit_direction(rng, d)
                    .iter()
                    .zip(&tight_center)
                    .map(|(u, c)| c + 3.0 * u)
                    .collect()
            }));
        }
        Archetype::Isolated => {
            normals.extend((0..n_norm).map(|_| gaussian(rng, d)));
            let mut attempts = 0;
            while anomalies.len() < n_anom {
                let p = shell_point(rng, d, 8.0, 12.0);
                attempts += 1;
                let separated = anomalies
                    .iter()
                    .all(|q| q.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>() >= 16.0);
                if separated || attempts > 10_000 {
                    anomalies.push(p);
                }
            }
        }
        Archetype::Clustered => {
            normals.extend((0..n_norm).map(|_| gaussian(rng, d)));
            let center = scaled(&unit_direction(rng, d), 6.0);
            anomalies.extend((0..n_anom).map(|_| {
                gaussian(rng, d)
                    .iter()
                    .zip(&center)
                    .map(|(g, c)| c + 0.2 * g)
                    .collect()
            }));
        }
        Archetype::Univariate => {
            normals.extend((0..n_norm).map(|_| gaussian(rng, d)));
            // standard normal interquartile range
            let iqr = 1.348_979_500_392_163_5;
            for _ in 0..n_anom {
                let mut p = gaussian(rng, d);
                let j = rng.random_range(0..d);
                let size = rng.random_range(6.0..6.5) * iqr;
                p[j] = if rng.random::<bool>() { size } else { -size };
                anomalies.push(p);
            }
        }
        Archetype::Multivariate => {
            let rho: f64 = 0.9;
            let major_sd = (1.0 + (d as f64 - 1.0) * rho).sqrt();
            let minor_sd = (1.0 - rho).sqrt();
            // x = sqrt(rho) * shared + sqrt(1 - rho) * own
            let correlated = |rng: &mut Rng| {
                let shared: f64 = StandardNormal.sample(rng);
                gaussian(rng, d)
                    .into_iter()
                    .map(|g| rho.sqrt() * shared + minor_sd * g)
                    .collect::<Vec<f64>>()
            };
            normals.extend((0..n_norm).map(|_| correlated(rng)));
            let (lo, hi) = bounding_box(&normals, d);
            let mut attempts = 0;
            while anomalies.len() < n_anom {
                let i = rng.random_range(0..d);
                let j = (i + rng.random_range(1..d)) % d;
                let along_major = rng.random_range(-0.5..0.5) * major_sd / (d as f64).sqrt();
                let off = rng.random_range(4.0..5.0) * minor_sd / std::f64::consts::SQRT_2;
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let mut p = vec![along_major; d];
                p[i] += sign * off;
                p[j] -= sign * off;
                attempts += 1;
                let inside = p.iter().enumerate().all(|(f, &v)| v > lo[f] && v < hi[f]);
                if inside || attempts > 10_000 {
                    anomalies.push(p);
                }
            }
        }
    }
    let rows: Vec<f64> = normals.into_iter().chain(anomalies).flatten().collect();
    let features = Array2::from_shape_vec((n, d), rows).expect("n x d values");
    let labels = (0..n).map(|i| u8::from(i >= n_norm)).collect();
    Dataset::new(
        format!("{}-n{}-d{}-s{}", spec.archetype, n, d, spec.seed),
        features,
        Some(labels),
    )
}

fn bounding_box(rows: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in rows {
        for j in 0..d {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    (lo, hi)
}
