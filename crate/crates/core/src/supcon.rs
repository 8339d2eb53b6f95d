//! Supervised contrastive loss over a batch of unit-norm embeddings.
//!
//! For anchor `i` with positives `P(i)` (other rows sharing its label) and
//! `A(i)` every row except `i`:
//!
//! ```text
//! L = Σ_i  −1/|P(i)| · Σ_{p∈P(i)} log( exp(z_i·z_p/τ) / Σ_{a∈A(i)} exp(z_i·z_a/τ) )
//! ```
//!
//! Anchors without positives contribute zero. There is no `1/|I|` factor, so
//! the value grows with the batch size.
//!
//! Writing `W_ij = softmax_j(z_i·z_·/τ) − [j∈P(i)]/|P(i)|` (zero on the
//! diagonal and for anchors without positives), the gradient with respect to
//! the rows is `∂L/∂Z = (W + Wᵀ)·Z / τ`.

use crate::error::{Error, Result};
use crate::exec;
use crate::matrix::{norm, Matrix};

pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// Validated loss input: unit rows, matching labels, positive temperature.
#[derive(Debug, Clone, Copy)]
pub struct ContrastiveBatch<'a> {
    embeddings: &'a Matrix,
    labels: &'a [usize],
    temperature: f64,
}

impl<'a> ContrastiveBatch<'a> {
    pub fn new(embeddings: &'a Matrix, labels: &'a [usize], temperature: f64) -> Result<Self> {
        check_shape(embeddings, labels, temperature)?;
        for i in 0..embeddings.rows() {
            let n = norm(embeddings.row(i));
            if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::NotUnitNorm { row: i, norm: n });
            }
        }
        Ok(Self {
            embeddings,
            labels,
            temperature,
        })
    }

    pub fn embeddings(&self) -> &Matrix {
        self.embeddings
    }

    pub fn labels(&self) -> &[usize] {
        self.labels
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

fn check_shape(z: &Matrix, labels: &[usize], tau: f64) -> Result<()> {
    if z.rows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: z.rows(),
            right: labels.len(),
        });
    }
    if z.rows() < 2 {
        return Err(Error::Config(
            "contrastive batch needs at least 2 rows (A(i) would be empty)".into(),
        ));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

pub fn supcon_loss(batch: &ContrastiveBatch<'_>) -> f64 {
    evaluate(batch.embeddings, batch.labels, batch.temperature, false).0
}

/// `∂L/∂z`, treating the rows as free vectors. Compose with
/// [`crate::nn::l2_normalize_rows_backward`] to reach pre-normalized inputs.
pub fn supcon_grad(batch: &ContrastiveBatch<'_>) -> Matrix {
    evaluate(batch.embeddings, batch.labels, batch.temperature, true).1
}

pub fn supcon_loss_and_grad(batch: &ContrastiveBatch<'_>) -> (f64, Matrix) {
    evaluate(batch.embeddings, batch.labels, batch.temperature, true)
}

/// The same objective on rows of any norm, similarity being the plain dot
/// product. This is the function whose derivative [`supcon_grad`] returns,
/// so finite-difference checks perturb through it.
pub fn supcon_dot_loss(z: &Matrix, labels: &[usize], temperature: f64) -> Result<(f64, Matrix)> {
    check_shape(z, labels, temperature)?;
    Ok(evaluate(z, labels, temperature, true))
}

struct AnchorTerm {
    loss: f64,
    // W row for this anchor, zero when it has no positives
    weights: Vec<f64>,
}

fn evaluate(z: &Matrix, labels: &[usize], tau: f64, want_grad: bool) -> (f64, Matrix) {
    let b = z.rows();
    let sims = z.matmul_transposed(z);
    let terms: Vec<AnchorTerm> = exec::map_range(b, |i| {
        let mut weights = vec![0.0; b];
        let positives = (0..b).filter(|&j| j != i && labels[j] == labels[i]).count();
        if positives == 0 {
            return AnchorTerm { loss: 0.0, weights };
        }
        let scores: Vec<f64> = (0..b).filter(|&j| j != i).map(|j| sims[(i, j)] / tau).collect();
        let lse = logsumexp(&scores);
        let inv_p = 1.0 / positives as f64;
        let mut loss = 0.0;
        for j in (0..b).filter(|&j| j != i) {
            let s = sims[(i, j)] / tau;
            let positive = labels[j] == labels[i];
            if positive {
                loss -= (s - lse) * inv_p;
            }
            weights[j] = (s - lse).exp() - if positive { inv_p } else { 0.0 };
        }
        AnchorTerm { loss, weights }
    });
    let loss = terms.iter().map(|t| t.loss).sum();
    if !want_grad {
        return (loss, Matrix::zeros(0, z.cols()));
    }
    let e = z.cols();
    let mut grad = Matrix::zeros(b, e);
    exec::for_each_row_mut(grad.as_mut_slice(), e, |k, row| {
        for j in 0..b {
            let w = terms[k].weights[j] + terms[j].weights[k];
            if w != 0.0 {
                let c = w / tau;
                row.iter_mut().zip(z.row(j)).for_each(|(g, &zj)| *g += c * zj);
            }
        }
    });
    (loss, grad)
}

fn logsumexp(scores: &[f64]) -> f64 {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

/// `log Σ exp(s_k)` via the max shift.
pub fn logsumexp_stable(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("logsumexp of an empty vector"));
    }
    Ok(logsumexp(scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::l2_normalize_rows;
    use crate::rng;
    use rand::Rng as _;

    /// Term-by-term evaluation written straight from the formula.
    fn brute_force(z: &Matrix, labels: &[usize], tau: f64) -> f64 {
        let b = z.rows();
        let sim = |i: usize, j: usize| -> f64 { (0..z.cols()).map(|k| z[(i, k)] * z[(j, k)]).sum() };
        let mut total = 0.0;
        for i in 0..b {
            let pos: Vec<usize> = (0..b).filter(|&p| p != i && labels[p] == labels[i]).collect();
            if pos.is_empty() {
                continue;
            }
            let mut denom = 0.0;
            for a in 0..b {
                if a != i {
                    denom += (sim(i, a) / tau).exp();
                }
            }
            let mut inner = 0.0;
            for &p in &pos {
                inner += ((sim(i, p) / tau).exp() / denom).ln();
            }
            total += -inner / pos.len() as f64;
        }
        total
    }

    fn random_unit(b: usize, e: usize, seed: u64) -> Matrix {
        let mut r = rng::rng(seed);
        let m = Matrix::from_vec(b, e, (0..b * e).map(|_| r.random_range(-1.0..1.0)).collect());
        l2_normalize_rows(&m).rows
    }

    #[test]
    fn identical_pair_same_label_is_zero() {
        let z = Matrix::from_rows(&[[0.6, 0.8], [0.6, 0.8]]).unwrap();
        for tau in [0.05, 0.5, 3.0] {
            let batch = ContrastiveBatch::new(&z, &[1, 1], tau).unwrap();
            assert_eq!(supcon_loss(&batch), 0.0);
            // minimum: no component along the (zero) inter-embedding direction
            let g = supcon_grad(&batch);
            assert!(g.as_slice().iter().all(|&x| x.abs() < 1e-15));
        }
    }

    #[test]
    fn no_positives_is_zero() {
        let z = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let batch = ContrastiveBatch::new(&z, &[0, 1], 0.1).unwrap();
        assert_eq!(supcon_loss(&batch), 0.0);
        assert!(supcon_grad(&batch).as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn four_point_hand_case() {
        let s = 0.5f64.sqrt();
        let z = Matrix::from_rows(&[[1.0, 0.0], [s, s], [0.0, 1.0], [-s, s]]).unwrap();
        let labels = [0, 0, 1, 1];
        let batch = ContrastiveBatch::new(&z, &labels, 0.5).unwrap();
        let expect = brute_force(&z, &labels, 0.5);
        assert!((supcon_loss(&batch) - expect).abs() < 1e-12);
        assert!(expect > 0.0);
    }

    #[test]
    fn rejects_bad_batches() {
        let z = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(ContrastiveBatch::new(&z, &[0], 0.1).is_err());
        let z = Matrix::from_rows(&[[1.0, 0.0], [2.0, 0.0]]).unwrap();
        assert!(matches!(
            ContrastiveBatch::new(&z, &[0, 0], 0.1),
            Err(Error::NotUnitNorm { row: 1, .. })
        ));
        let z = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(ContrastiveBatch::new(&z, &[0, 0], 0.0).is_err());
        assert!(ContrastiveBatch::new(&z, &[0], 0.1).is_err());
    }

    #[test]
    fn gradient_depends_on_temperature() {
        let z = random_unit(8, 4, 3);
        let labels = [0, 1, 0, 1, 2, 2, 0, 1];
        let g1 = supcon_grad(&ContrastiveBatch::new(&z, &labels, 0.4).unwrap());
        let g2 = supcon_grad(&ContrastiveBatch::new(&z, &labels, 0.2).unwrap());
        assert_ne!(g1, g2);
    }

    #[test]
    fn logsumexp_cases() {
        assert!((logsumexp_stable(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let big = logsumexp_stable(&[1000.0, 1000.0]).unwrap();
        assert!((big - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!(logsumexp_stable(&[-1e4, 1e4]).unwrap().is_finite());
        assert!(logsumexp_stable(&[]).is_err());
        let mut r = rng::rng(1);
        for _ in 0..200 {
            let v: Vec<f64> = (0..r.random_range(1..20)).map(|_| r.random_range(-30.0..30.0)).collect();
            let naive = v.iter().map(|x| x.exp()).sum::<f64>().ln();
            let rel = (logsumexp_stable(&v).unwrap() - naive).abs() / naive.abs().max(1.0);
            assert!(rel < 1e-12);
        }
    }

    #[test]
    fn matches_brute_force_on_random_batches() {
        let mut r = rng::rng(42);
        for seed in 0..200 {
            let b = r.random_range(2..=16);
            let e = r.random_range(2..=8);
            let k = r.random_range(1..=4);
            let tau = r.random_range(0.05..1.0);
            let z = random_unit(b, e, seed);
            let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..k)).collect();
            let batch = ContrastiveBatch::new(&z, &labels, tau).unwrap();
            let got = supcon_loss(&batch);
            assert!((got - brute_force(&z, &labels, tau)).abs() < 1e-10);
            assert!(got >= -1e-12);
        }
    }
}
