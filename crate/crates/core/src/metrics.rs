//! Accuracy, one-vs-rest G-mean and confusion matrices.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns are predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    class_count: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if let Some(bad) = counts.iter().find(|r| r.len() != k) {
            return Err(Error::LengthMismatch {
                left: k,
                right: bad.len(),
            });
        }
        Ok(Self {
            class_count: k,
            counts: counts.concat(),
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.class_count + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.class_count).map(|p| self.get(c, p)).sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.class_count).map(|t| self.get(t, c)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.class_count).map(|c| self.get(c, c)).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.class_count.max(1)).map(|r| r.to_vec()).collect()
    }

    /// CSV with a `true\predicted` corner cell and class names on both axes.
    pub fn write_csv(&self, class_names: &[String], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if class_names.len() != self.class_count {
            return Err(Error::LengthMismatch {
                left: class_names.len(),
                right: self.class_count,
            });
        }
        let mut out = String::from("true\\predicted");
        for name in class_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (t, name) in class_names.iter().enumerate() {
            out.push_str(name);
            for p in 0..self.class_count {
                out.push_str(&format!(",{}", self.get(t, p)));
            }
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], class_count: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let mut counts = vec![0u64; class_count * class_count];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= class_count {
                return Err(Error::LabelOutOfRange { label, class_count });
            }
        }
        counts[t * class_count + p] += 1;
    }
    Ok(ConfusionMatrix { class_count, counts })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyInput("confusion matrix"));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// `sqrt(recall · specificity)` for class `c` against the rest. A class
/// that makes up every sample has specificity 1.
pub fn gmean_class(cm: &ConfusionMatrix, c: usize) -> Result<f64> {
    if c >= cm.class_count {
        return Err(Error::LabelOutOfRange {
            label: c,
            class_count: cm.class_count,
        });
    }
    let tp = cm.get(c, c);
    let fn_ = cm.row_sum(c) - tp;
    let fp = cm.col_sum(c) - tp;
    let tn = cm.total() - tp - fn_ - fp;
    if tp + fn_ == 0 {
        return Err(Error::EmptyClass(c));
    }
    let recall = tp as f64 / (tp + fn_) as f64;
    let specificity = if tn + fp == 0 {
        1.0
    } else {
        tn as f64 / (tn + fp) as f64
    };
    Ok((recall * specificity).sqrt())
}

pub fn macro_gmean(cm: &ConfusionMatrix) -> Result<f64> {
    Ok(mean(&per_class_gmean(cm)?))
}

pub fn per_class_gmean(cm: &ConfusionMatrix) -> Result<Vec<f64>> {
    (0..cm.class_count).map(|c| gmean_class(cm, c)).collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub accuracy: f64,
    pub per_class_gmean: Vec<f64>,
    pub macro_gmean: f64,
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsBundle {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        let per_class_gmean = per_class_gmean(cm)?;
        Ok(Self {
            accuracy: accuracy(cm)?,
            macro_gmean: mean(&per_class_gmean),
            per_class_gmean,
            confusion: cm.to_rows(),
        })
    }

    pub fn evaluate(y_true: &[usize], y_pred: &[usize], class_count: usize) -> Result<Self> {
        Self::from_confusion(&confusion(y_true, y_pred, class_count)?)
    }

    pub fn confusion_matrix(&self) -> Result<ConfusionMatrix> {
        ConfusionMatrix::from_counts(self.confusion.clone())
    }
}
