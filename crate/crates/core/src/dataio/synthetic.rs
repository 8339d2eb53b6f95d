//! Desk-scale stand-in for SCADA fault recordings.
//!
//! Classes are laid out one after another in time. Within class `c` the mean
//! moves in a straight line from `c`'s center toward the center of `c + 1`,
//! reaching `drift_rate` of the way there by the end of the segment, so the
//! tail of each condition overlaps the head of the next one. The last class
//! is stationary. Latent points are mapped to raw channels through a random
//! per-column affine transform so the columns have unrelated units.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::matrix::{dot, norm};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub class_count: usize,
    pub feature_count: usize,
    /// Samples per class, in time order.
    pub class_sizes: Vec<usize>,
    /// Fraction of the gap to the next center covered by the end of a class.
    pub drift_rate: f64,
    pub noise_sigma: f64,
    /// Euclidean distance between any two class centers in latent space.
    pub center_separation: f64,
    /// When set, largest/smallest class size must be at least this ratio.
    pub min_imbalance_ratio: Option<f64>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// The bundled overlapping, imbalanced five-condition set.
    fn default() -> Self {
        Self {
            class_count: 5,
            feature_count: super::SCADA_FEATURE_COUNT,
            class_sizes: vec![2000, 400, 200, 100, 50],
            drift_rate: 0.6,
            noise_sigma: 1.0,
            center_separation: 4.0,
            min_imbalance_ratio: Some(10.0),
            seed: 2023,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.class_count == 0 || self.feature_count == 0 {
            return bad("class_count and feature_count must be positive".into());
        }
        if self.class_sizes.len() != self.class_count {
            return bad(format!(
                "class_sizes has {} entries for {} classes",
                self.class_sizes.len(),
                self.class_count
            ));
        }
        if let Some(c) = self.class_sizes.iter().position(|&n| n == 0) {
            return bad(format!("class {c} has size 0"));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be positive, got {}", self.noise_sigma));
        }
        if !(self.drift_rate >= 0.0 && self.drift_rate.is_finite()) {
            return bad(format!("drift_rate must be >= 0, got {}", self.drift_rate));
        }
        if !(self.center_separation >= 0.0 && self.center_separation.is_finite()) {
            return bad("center_separation must be finite and >= 0".into());
        }
        if let Some(ratio) = self.min_imbalance_ratio {
            let hi = *self.class_sizes.iter().max().unwrap() as f64;
            let lo = *self.class_sizes.iter().min().unwrap() as f64;
            if hi / lo < ratio {
                return bad(format!(
                    "class sizes span {:.2}:1, imbalance of at least {ratio}:1 requested",
                    hi / lo
                ));
            }
        }
        Ok(())
    }
}

/// Generator internals, for oracles that need the latent geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    /// Latent class centers, one row per class.
    pub centers: Vec<Vec<f64>>,
    /// Raw channel `j` is `offsets[j] + scales[j] * latent[j]`.
    pub offsets: Vec<f64>,
    pub scales: Vec<f64>,
}

impl SyntheticTruth {
    pub fn to_latent(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.offsets.iter().zip(&self.scales))
            .map(|(x, (o, s))| (x - o) / s)
            .collect()
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    generate_synthetic_with_truth(spec).map(|(ds, _)| ds)
}

pub fn generate_synthetic_with_truth(spec: &SyntheticSpec) -> Result<(Dataset, SyntheticTruth)> {
    spec.validate()?;
    let mut rng = rng::rng(spec.seed);
    let d = spec.feature_count;
    let centers = class_centers(spec, &mut rng);
    let offsets: Vec<f64> = (0..d).map(|_| rng.random_range(-50.0..50.0)).collect();
    let scales: Vec<f64> = (0..d)
        .map(|_| 10f64.powf(rng.random_range(-1.0..2.0)))
        .collect();

    let total: usize = spec.class_sizes.iter().sum();
    let mut samples = Vec::with_capacity(total);
    for (c, &n) in spec.class_sizes.iter().enumerate() {
        let next = centers.get(c + 1);
        for t in 0..n {
            let progress = spec.drift_rate * t as f64 / n as f64;
            let features = (0..d)
                .map(|j| {
                    let mean = match next {
                        Some(nx) => centers[c][j] + progress * (nx[j] - centers[c][j]),
                        None => centers[c][j],
                    };
                    let z: f64 = StandardNormal.sample(&mut rng);
                    offsets[j] + scales[j] * (mean + spec.noise_sigma * z)
                })
                .collect();
            samples.push(Sample {
                features,
                label: c,
                timestamp_index: samples.len(),
            });
        }
    }
    let mut ds = Dataset::new(samples, spec.class_count)?;
    ds.set_synthetic_spec(spec.clone());
    Ok((
        ds,
        SyntheticTruth {
            centers,
            offsets,
            scales,
        },
    ))
}

/// Centers on mutually orthogonal random directions at radius `sep/√2`, so
/// every pair is exactly `sep` apart. Classes beyond the dimension fall back
/// to random directions at the same radius.
fn class_centers(spec: &SyntheticSpec, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    let d = spec.feature_count;
    let radius = spec.center_separation / std::f64::consts::SQRT_2;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut centers = Vec::with_capacity(spec.class_count);
    for _ in 0..spec.class_count {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
        if basis.len() < d {
            for b in &basis {
                let p = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, bj)| *x -= p * bj);
            }
        }
        let n = norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        if basis.len() < d {
            basis.push(v.clone());
        }
        centers.push(v.into_iter().map(|x| x * radius).collect());
    }
    centers
}
