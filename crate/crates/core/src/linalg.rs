//! Dense linear-algebra helpers shared by the estimators.
//!
//! Data lives in `ndarray` containers; the few decompositions we need
//! (symmetric eigen, thin SVD, QR) are delegated to `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen, QR, SVD};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub(crate) fn to_dmatrix(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending
/// and eigenvectors stored as the matching columns.
pub fn symmetric_eigen(a: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let eig = SymmetricEigen::new(to_dmatrix(a));
    let order = descending_order(eig.eigenvalues.as_slice());
    let n = a.nrows();
    let values = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
    let vectors = Array2::from_shape_fn((n, order.len()), |(i, j)| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues of a symmetric matrix, sorted descending.
pub fn symmetric_eigenvalues(a: ArrayView2<'_, f64>) -> Vec<f64> {
    let vals = to_dmatrix(a).symmetric_eigenvalues();
    let mut v: Vec<f64> = vals.iter().copied().collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Singular values, descending.
pub fn singular_values(a: ArrayView2<'_, f64>) -> Vec<f64> {
    let svd = SVD::new(to_dmatrix(a), false, false);
    let mut v: Vec<f64> = svd.singular_values.iter().copied().collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

/// Left singular vectors of the thin SVD, columns ordered by descending
/// singular value.
pub fn left_singular_vectors(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let svd = SVD::new(to_dmatrix(a), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let order = descending_order(svd.singular_values.as_slice());
    Array2::from_shape_fn((a.nrows(), order.len()), |(i, j)| u[(i, order[j])])
}

/// Orthonormal basis (thin Q) for the column span of a full-column-rank matrix.
pub fn orthonormal_basis(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if a.ncols() > a.nrows() {
        return Err(Error::Dimension(format!(
            "cannot orthonormalize {} columns in dimension {}",
            a.ncols(),
            a.nrows()
        )));
    }
    let qr = QR::new(to_dmatrix(a));
    let r = qr.r();
    let scale = (0..r.nrows()).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..r.nrows()).any(|i| r[(i, i)].abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Numerical("columns are linearly dependent".into()));
    }
    Ok(from_dmatrix(&qr.q()))
}

/// Inverse of a small symmetric positive definite matrix together with its
/// spectral condition number.
pub fn spd_inverse(a: ArrayView2<'_, f64>) -> Result<(Array2<f64>, f64)> {
    let (vals, vecs) = symmetric_eigen(a);
    let max = vals.first().copied().unwrap_or(0.0);
    let min = vals.last().copied().unwrap_or(0.0);
    if !(max > 0.0) || !(min > 0.0) {
        return Err(Error::SingularDesign { condition: f64::INFINITY, limit: 0.0 });
    }
    let inv_vals = vals.mapv(|v| 1.0 / v);
    let inv = (&vecs * &inv_vals).dot(&vecs.t());
    Ok((inv, max / min))
}

pub fn frobenius_norm(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_abs(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sup_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn norm2(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Largest absolute asymmetry `|a_ij - a_ji|` relative to `max |a_ij|`.
pub fn relative_asymmetry(a: ArrayView2<'_, f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    let scale = max_abs(a);
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// `S x` for a symmetric `S` and a vector whose nonzeros are listed in
/// `support`. Sums run over the support in ascending index order.
pub(crate) fn matvec_on_support(s: ArrayView2<'_, f64>, x: ArrayView1<'_, f64>, support: &[usize]) -> Array1<f64> {
    let n = s.nrows();
    let mut out = Array1::zeros(n);
    for &j in support {
        let xj = x[j];
        // S is symmetric, so row j is column j and is contiguous.
        out.scaled_add(xj, &s.row(j));
    }
    out
}
