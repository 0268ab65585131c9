//! Accuracy measures comparing estimated and true sparse factors.

use std::collections::HashSet;

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;

/// `sqrt(1 - (f̂'f / T)^2)` with both vectors rescaled to squared norm `T`,
/// i.e. the sine of the angle between them.
pub fn factor_angle_error(f_hat: ArrayView1<'_, f64>, f_true: ArrayView1<'_, f64>) -> Result<f64> {
    if f_hat.len() != f_true.len() {
        return Err(Error::Dimension(format!("vectors of length {} and {}", f_hat.len(), f_true.len())));
    }
    let (a, b) = (linalg::norm2(f_hat), linalg::norm2(f_true));
    if a == 0.0 || b == 0.0 {
        return Err(Error::Precondition("factor angle undefined for a zero vector".into()));
    }
    let cos = (f_hat.dot(&f_true) / (a * b)).clamp(-1.0, 1.0);
    Ok((1.0 - cos * cos).max(0.0).sqrt())
}

/// `sum_j #(S_j ∩ Ŝ_j) / (r s)`, matching estimated column `j` with true column `j`.
pub fn recovery_rate(estimated: &[Vec<usize>], truth: &[Vec<usize>], s: usize) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(Error::Dimension(format!("{} estimated supports for {} true ones", estimated.len(), truth.len())));
    }
    if truth.is_empty() || s == 0 {
        return Err(Error::Dimension("recovery rate needs r >= 1 and s >= 1".into()));
    }
    if let Some(bad) = truth.iter().find(|sup| sup.len() != s) {
        return Err(Error::Dimension(format!("true support of size {} where s = {s}", bad.len())));
    }
    let hits: usize = estimated
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let e: HashSet<_> = e.iter().collect();
            t.iter().filter(|i| e.contains(i)).count()
        })
        .sum();
    Ok(hits as f64 / (truth.len() * s) as f64)
}

/// `|F̂F̂'/T - FF'/T|_F`, computed through `r×r` cross products.
pub fn factor_matrix_error(f_hat: ArrayView2<'_, f64>, f_true: ArrayView2<'_, f64>) -> Result<f64> {
    if f_hat.nrows() != f_true.nrows() {
        return Err(Error::Dimension(format!("factor matrices with {} and {} rows", f_hat.nrows(), f_true.nrows())));
    }
    let t = f_hat.nrows() as f64;
    // |AA' - BB'|^2 = |A'A|^2 + |B'B|^2 - 2 |A'B|^2
    let aa = linalg::frobenius_norm(f_hat.t().dot(&f_hat).view());
    let bb = linalg::frobenius_norm(f_true.t().dot(&f_true).view());
    let ab = linalg::frobenius_norm(f_hat.t().dot(&f_true).view());
    Ok((aa * aa + bb * bb - 2.0 * ab * ab).max(0.0).sqrt() / t)
}
