//! Tabular fault-record ingestion, normalization, splitting and synthesis.

mod csv_io;
mod normalize;
mod split;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub(crate) use csv_io::format_real;
pub use csv_io::{load_csv, load_dataset, read_metadata, write_csv, write_dataset, write_metadata, CsvSchema, DatasetMeta};
pub use normalize::{normalize_minmax, NormStats};
pub use split::{split, SplitConfig};
pub use synthetic::{generate_synthetic, generate_synthetic_with_truth, SyntheticSpec, SyntheticTruth};

/// Number of SCADA channels in the cog-belt fault records.
pub const SCADA_FEATURE_COUNT: usize = 26;

/// Health conditions of the cog belt, in label order.
pub const HEALTH_CONDITIONS: [&str; 5] = [
    "normal",
    "slightly worn",
    "low risk of fracture",
    "high risk of fracture",
    "complete fracture",
];

/// One record: a feature vector plus its class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
    /// Ordinal position in the original recording.
    pub timestamp_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// Ordered samples with optional normalization statistics and split tags.
///
/// A `Dataset` is never mutated in place; the preprocessing operations
/// return new values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    class_count: usize,
    feature_count: usize,
    norm_stats: Option<NormStats>,
    split_assignment: Option<Vec<Split>>,
    synthetic_spec: Option<SyntheticSpec>,
    warnings: Vec<String>,
}

impl Dataset {
    /// Validates arity, finiteness and label range.
    pub fn new(samples: Vec<Sample>, class_count: usize) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::Config("class_count must be positive".into()));
        }
        let feature_count = samples.first().map_or(0, |s| s.features.len());
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != feature_count {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!(
                        "expected {feature_count} features, found {}",
                        s.features.len()
                    ),
                });
            }
            if let Some(j) = s.features.iter().position(|x| !x.is_finite()) {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("feature {j} is not finite"),
                });
            }
            if s.label >= class_count {
                return Err(Error::LabelOutOfRange {
                    label: s.label,
                    class_count,
                });
            }
        }
        Ok(Self {
            samples,
            class_count,
            feature_count,
            norm_stats: None,
            split_assignment: None,
            synthetic_spec: None,
            warnings: Vec::new(),
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn norm_stats(&self) -> Option<&NormStats> {
        self.norm_stats.as_ref()
    }

    pub fn split_assignment(&self) -> Option<&[Split]> {
        self.split_assignment.as_deref()
    }

    pub fn synthetic_spec(&self) -> Option<&SyntheticSpec> {
        self.synthetic_spec.as_ref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Dataset indices tagged with `split`, in dataset order.
    ///
    /// Without a split assignment every sample belongs to every split.
    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        match &self.split_assignment {
            Some(tags) => tags
                .iter()
                .enumerate()
                .filter(|(_, &t)| t == split)
                .map(|(i, _)| i)
                .collect(),
            None => (0..self.len()).collect(),
        }
    }

    /// Features and labels of one split as a dense block.
    pub fn labeled_set(&self, split: Split) -> LabeledSet {
        self.labeled_subset(self.indices_of(split))
    }

    /// Every sample, ignoring split tags.
    pub fn labeled_all(&self) -> LabeledSet {
        self.labeled_subset((0..self.len()).collect())
    }

    fn labeled_subset(&self, indices: Vec<usize>) -> LabeledSet {
        let mut data = Vec::with_capacity(indices.len() * self.feature_count);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in &indices {
            data.extend_from_slice(&self.samples[i].features);
            labels.push(self.samples[i].label);
        }
        LabeledSet {
            features: Matrix::from_vec(indices.len(), self.feature_count, data),
            labels,
            class_count: self.class_count,
            source_indices: indices,
        }
    }

    pub(crate) fn with_samples(&self, samples: Vec<Sample>) -> Self {
        Self {
            samples,
            ..self.clone()
        }
    }

    pub(crate) fn set_norm_stats(&mut self, stats: NormStats) {
        self.norm_stats = Some(stats);
    }

    pub(crate) fn set_split_assignment(&mut self, tags: Vec<Split>) {
        self.split_assignment = Some(tags);
    }

    pub(crate) fn set_synthetic_spec(&mut self, spec: SyntheticSpec) {
        self.synthetic_spec = Some(spec);
    }

    pub(crate) fn push_warning(&mut self, w: String) {
        log::warn!("{w}");
        self.warnings.push(w);
    }

    /// Restore sidecar metadata onto freshly loaded samples.
    pub fn with_metadata(mut self, meta: DatasetMeta) -> Result<Self> {
        if meta.feature_count != self.feature_count && !self.samples.is_empty() {
            return Err(Error::Config(format!(
                "metadata declares {} features, file has {}",
                meta.feature_count, self.feature_count
            )));
        }
        if meta.class_count != self.class_count {
            return Err(Error::Config(format!(
                "metadata declares {} classes, dataset was loaded with {}",
                meta.class_count, self.class_count
            )));
        }
        if let Some(tags) = &meta.split_assignment {
            if tags.len() != self.len() {
                return Err(Error::LengthMismatch {
                    left: tags.len(),
                    right: self.len(),
                });
            }
        }
        self.norm_stats = meta.norm_stats;
        self.split_assignment = meta.split_assignment;
        self.synthetic_spec = meta.synthetic_spec;
        self.warnings = meta.warnings;
        Ok(self)
    }

    pub fn metadata(&self) -> DatasetMeta {
        DatasetMeta {
            class_count: self.class_count,
            feature_count: self.feature_count,
            norm_stats: self.norm_stats.clone(),
            split_assignment: self.split_assignment.clone(),
            synthetic_spec: self.synthetic_spec.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Dense view of a subset of a [`Dataset`]: row `i` is dataset sample
/// `source_indices[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub source_indices: Vec<usize>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}
