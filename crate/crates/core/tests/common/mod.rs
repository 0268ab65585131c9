#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparse_apca::linalg::symmetric_eigenvalues;
use sparse_apca::GramMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

pub fn random_psd(dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let m = gaussian(dim, dim + 2, rng);
    let s = m.dot(&m.t());
    (&s + &s.t()) / 2.0
}

pub fn gram(s: Array2<f64>) -> GramMatrix {
    let d = s.nrows();
    GramMatrix::from_symmetric(s, 1, d).unwrap()
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn submatrix(a: ArrayView2<'_, f64>, idx: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((idx.len(), idx.len()), |(i, j)| a[[idx[i], idx[j]]])
}

/// Exhaustive `max_{|J|=k} λ_max(S_JJ)`.
pub fn sparse_pca_optimum(s: ArrayView2<'_, f64>, k: usize) -> f64 {
    subsets(s.nrows(), k)
        .iter()
        .map(|j| symmetric_eigenvalues(submatrix(s, j).view())[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn rayleigh(s: ArrayView2<'_, f64>, v: &Array1<f64>) -> f64 {
    v.dot(&s.dot(v)) / v.dot(v)
}
