use serde::{Deserialize, Serialize};

use super::{Dataset, Split};

/// Per-column `(min, max)` used by min–max scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    /// Column extrema over `rows`.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, width: usize) -> Self {
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for row in rows {
            for (j, &x) in row.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Self { min, max }
    }

    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.min.len())
            .filter(|&j| self.max[j] <= self.min[j])
            .collect()
    }

    /// Scale one row into `[0, 1]`. Values outside the fitted range are
    /// clamped; constant columns map to 0.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &x)| {
                let span = self.max[j] - self.min[j];
                if span > 0.0 {
                    ((x - self.min[j]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Rescale every sample of `ds` with these statistics.
    pub fn apply_to(&self, ds: &Dataset) -> Dataset {
        let samples = ds
            .samples()
            .iter()
            .map(|s| super::Sample {
                features: self.apply(&s.features),
                ..s.clone()
            })
            .collect();
        let mut out = ds.with_samples(samples);
        out.set_norm_stats(self.clone());
        out
    }
}

/// Min–max scale every column into `[0, 1]`.
///
/// Statistics come from the training split when one is assigned, otherwise
/// from all samples, and are always recomputed from the input. Val/test
/// values outside the training range are clamped. A constant column maps to
/// zeros and records a warning.
pub fn normalize_minmax(ds: &Dataset) -> Dataset {
    let rows: Vec<&[f64]> = ds
        .indices_of(Split::Train)
        .into_iter()
        .map(|i| ds.samples()[i].features.as_slice())
        .collect();
    let stats = NormStats::fit(rows, ds.feature_count());
    let constant = stats.constant_columns();
    let mut out = stats.apply_to(ds);
    for j in constant {
        out.push_warning(format!("column {j} is constant; normalized to 0"));
    }
    out
}
