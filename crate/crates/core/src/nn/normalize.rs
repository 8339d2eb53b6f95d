use crate::exec;
use crate::matrix::{dot, norm, Matrix};

/// Row-normalized matrix with the original norms kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRows {
    pub rows: Matrix,
    pub norms: Vec<f64>,
    /// Rows whose norm was exactly zero; they are left as zeros.
    pub zero_rows: Vec<usize>,
}

pub fn l2_normalize_rows(m: &Matrix) -> NormalizedRows {
    let norms: Vec<f64> = exec::map_range(m.rows(), |i| norm(m.row(i)));
    let mut rows = m.clone();
    let cols = m.cols();
    exec::for_each_row_mut(rows.as_mut_slice(), cols, |i, row| {
        if norms[i] > 0.0 {
            row.iter_mut().for_each(|x| *x /= norms[i]);
        }
    });
    let zero_rows = norms
        .iter()
        .enumerate()
        .filter(|(_, &n)| n == 0.0)
        .map(|(i, _)| i)
        .collect();
    NormalizedRows {
        rows,
        norms,
        zero_rows,
    }
}

/// Chain rule through `y = x/‖x‖`: `dx = (dy − y·(y·dy)) / ‖x‖`.
pub fn l2_normalize_rows_backward(fwd: &NormalizedRows, grad: &Matrix) -> Matrix {
    let mut dx = grad.clone();
    let cols = grad.cols();
    exec::for_each_row_mut(dx.as_mut_slice(), cols, |i, row| {
        let n = fwd.norms[i];
        if n == 0.0 {
            row.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        let y = fwd.rows.row(i);
        let proj = dot(y, row);
        row.iter_mut()
            .zip(y)
            .for_each(|(d, &yj)| *d = (*d - yj * proj) / n);
    });
    dx
}
