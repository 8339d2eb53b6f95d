use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone)]
pub struct CrossEntropy {
    /// Mean negative log-likelihood over the batch.
    pub loss: f64,
    /// Gradient of `loss` with respect to the logits.
    pub grad: Matrix,
}

/// Softmax cross-entropy averaged over the rows of `logits`.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<CrossEntropy> {
    if logits.rows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: logits.rows(),
            right: labels.len(),
        });
    }
    if logits.rows() == 0 {
        return Err(Error::EmptyInput("cross-entropy batch"));
    }
    let k = logits.cols();
    let scale = 1.0 / logits.rows() as f64;
    let mut grad = Matrix::zeros(logits.rows(), k);
    let mut loss = 0.0;
    for (b, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::LabelOutOfRange {
                label: y,
                class_count: k,
            });
        }
        let row = logits.row(b);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - row[y];
        let g = grad.row_mut(b);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = (row[j] - lse).exp() * scale;
        }
        g[y] -= scale;
    }
    Ok(CrossEntropy {
        loss: loss * scale,
        grad,
    })
}
