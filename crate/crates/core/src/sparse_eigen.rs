//! Cardinality-constrained leading eigenvectors.
//!
//! [`truncated_power`] solves `max v'Sv` subject to `|v| = 1` and at most `s`
//! nonzeros by interleaving power steps with hard thresholding.
//! [`sparse_eigen_sequence`] extracts several such vectors, deflating `S`
//! and tracking the normalisation matrix `B` after each one; from the second
//! vector on the constrained problem is `max v'Sv` subject to `v'Bv = 1`,
//! handled by [`generalized_truncated_power`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, matvec_on_support, norm2, sup_distance};
use crate::panel::GramMatrix;

/// Below this norm a power step is treated as having collapsed to zero.
const DEGENERATE_NORM: f64 = 1e-14;
const MAX_RESTARTS: usize = 3;
/// Plain power steps used for the dense warm start.
const WARM_START_STEPS: usize = 50;
/// Coordinate starts tried alongside the warm start, taken at the largest
/// diagonal entries of `S`.
const COORDINATE_STARTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Stop once `|u_t - u_{t-1}|_inf <= epsilon`.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Singular values below `tol * largest` are dropped from pseudo roots.
    pub pseudo_inverse_tolerance: f64,
    /// Seed for the random fallback initializer.
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { epsilon: 1e-3, max_iterations: 500, pseudo_inverse_tolerance: 1e-10, seed: 0 }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        let tol = self.pseudo_inverse_tolerance;
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::Config(format!("pseudo_inverse_tolerance must lie in (0, 1), got {tol}")));
        }
        Ok(())
    }
}

/// A vector with at most `cardinality_bound` nonzeros. `support` lists the
/// nonzero positions in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    values: Array1<f64>,
    support: Vec<usize>,
    cardinality_bound: usize,
}

impl SparseVector {
    fn from_dense(values: Array1<f64>, cardinality_bound: usize) -> Self {
        let support = values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
        Self { values, support, cardinality_bound }
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array1<f64> {
        self.values
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn cardinality_bound(&self) -> usize {
        self.cardinality_bound
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm2(self.values.view())
    }

    /// Scales to unit Euclidean norm. The zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Self { values: &self.values / n, support: self.support.clone(), cardinality_bound: self.cardinality_bound }
    }
}

/// Result of one sparse eigenvector solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub vector: SparseVector,
    pub converged: bool,
    pub iterations: usize,
    /// Number of re-initialisations after a degenerate power step.
    pub restarts: usize,
    /// Objective value of the initial iterate followed by one entry per
    /// iteration: `u'Su` for [`truncated_power`], `x'Sx / x'Bx` for the
    /// generalized iteration.
    pub objective_path: Vec<f64>,
}

/// Iteration trace suitable for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveTrace {
    pub converged: bool,
    pub iterations: usize,
    pub restarts: usize,
    pub objective_path: Vec<f64>,
    pub support: Vec<usize>,
}

impl SolveOutcome {
    pub fn trace(&self) -> SolveTrace {
        SolveTrace {
            converged: self.converged,
            iterations: self.iterations,
            restarts: self.restarts,
            objective_path: self.objective_path.clone(),
            support: self.vector.support.clone(),
        }
    }
}

/// Keeps the `k` entries of largest magnitude and zeroes the rest. Ties go to
/// the lower index. The result is not renormalised.
pub fn truncate_top_k(v: ArrayView1<'_, f64>, k: usize) -> Result<SparseVector> {
    let len = v.len();
    if k == 0 || k > len {
        return Err(Error::Dimension(format!("cardinality {k} outside 1..={len}")));
    }
    if k == len {
        return Ok(SparseVector::from_dense(v.to_owned(), k));
    }
    let mut idx: Vec<usize> = (0..len).collect();
    let order = |&a: &usize, &b: &usize| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b));
    idx.select_nth_unstable_by(k - 1, order);
    let mut out = Array1::zeros(len);
    for &i in &idx[..k] {
        out[i] = v[i];
    }
    Ok(SparseVector::from_dense(out, k))
}

fn check_cardinality(s: usize, dim: usize) -> Result<()> {
    if s == 0 || s > dim {
        return Err(Error::Dimension(format!("sparsity {s} outside 1..={dim}")));
    }
    Ok(())
}

/// Flips the sign so that the entry of largest magnitude (lowest index on
/// ties) is positive.
fn sign_normalize(v: SparseVector) -> SparseVector {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &i in &v.support {
        if v.values[i].abs() > best {
            best = v.values[i].abs();
            sign = v.values[i].signum();
        }
    }
    let mut v = v;
    if sign < 0.0 {
        for &i in &v.support {
            v.values[i] = -v.values[i];
        }
    }
    v
}

/// Leading eigenvector estimate by plain power iteration from the all-ones
/// vector. `None` if the iterate collapses to zero.
pub fn dense_leading_vector(s: ArrayView2<'_, f64>) -> Option<Array1<f64>> {
    let dim = s.nrows();
    let mut v = Array1::from_elem(dim, 1.0 / (dim as f64).sqrt());
    for _ in 0..WARM_START_STEPS {
        let w = s.dot(&v);
        let n = norm2(w.view());
        if !(n > DEGENERATE_NORM) {
            return None;
        }
        v = w / n;
    }
    Some(v)
}

fn random_unit(dim: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Array1<f64> = Array1::from_iter((0..dim).map(|_| StandardNormal.sample(&mut rng)));
    let n = norm2(v.view());
    v / n
}

/// Truncated, normalised initial iterate: the dense leading vector when it
/// survives truncation, otherwise a seeded random draw.
fn initial_iterate(
    s: ArrayView2<'_, f64>,
    k: usize,
    dense: Option<ArrayView1<'_, f64>>,
    seed: u64,
) -> Result<SparseVector> {
    let computed;
    let dense = match dense {
        Some(d) => Some(d),
        None => {
            computed = dense_leading_vector(s);
            computed.as_ref().map(|d| d.view())
        }
    };
    if let Some(d) = dense {
        let t = truncate_top_k(d, k)?;
        if t.norm() > 0.0 {
            return Ok(t.normalized());
        }
    }
    Ok(truncate_top_k(random_unit(s.nrows(), seed).view(), k)?.normalized())
}

/// Random restart mixed into the current iterate.
fn perturbed(current: ArrayView1<'_, f64>, k: usize, seed: u64) -> Result<SparseVector> {
    let noise = random_unit(current.len(), seed);
    let mixed = &current + &noise;
    let t = truncate_top_k(mixed.view(), k)?;
    if t.norm() > 0.0 {
        Ok(t.normalized())
    } else {
        Ok(truncate_top_k(noise.view(), k)?.normalized())
    }
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(restart as u64 + 1))
}

/// Leading `s`-sparse unit eigenvector of `S` by truncated power iteration.
///
/// Without `u0` the iteration is run from the dense leading vector (50 power
/// steps from the all-ones vector) truncated to `s` entries and from a few
/// diagonal-based starts; the best final objective is returned.
pub fn truncated_power(
    s: &GramMatrix,
    k: usize,
    settings: &SolverSettings,
    u0: Option<ArrayView1<'_, f64>>,
) -> Result<SolveOutcome> {
    let start = match u0 {
        Some(u) => {
            if u.len() != s.dim() {
                return Err(Error::Dimension(format!("initial vector has length {}, expected {}", u.len(), s.dim())));
            }
            check_cardinality(k, s.dim())?;
            if norm2(u) == 0.0 {
                return Err(Error::Initialization("initial vector is zero".into()));
            }
            truncate_top_k(u, k)?.normalized()
        }
        None => {
            check_cardinality(k, s.dim())?;
            return truncated_power_multistart(s.values(), k, settings, None);
        }
    };
    truncated_power_from(s.values(), k, settings, start)
}

/// Starts used when no initial vector is supplied: the truncated warm start,
/// the indicator of the `k` largest diagonal entries, and the unit vectors at
/// the [`COORDINATE_STARTS`] largest diagonal entries. Duplicates are dropped.
fn default_starts(
    s: ArrayView2<'_, f64>,
    k: usize,
    dense: Option<ArrayView1<'_, f64>>,
    seed: u64,
) -> Result<Vec<SparseVector>> {
    let dim = s.nrows();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| s[[b, b]].total_cmp(&s[[a, a]]).then(a.cmp(&b)));
    let mut starts = vec![initial_iterate(s, k, dense, seed)?];
    if !(s[[order[0], order[0]]] > 0.0) {
        return Ok(starts);
    }
    let mut indicator = Array1::zeros(dim);
    for &i in order.iter().take(k) {
        indicator[i] = 1.0;
    }
    let mut candidates = vec![SparseVector::from_dense(indicator, k).normalized()];
    for &i in order.iter().take(COORDINATE_STARTS.min(dim)) {
        let mut e = Array1::zeros(dim);
        e[i] = 1.0;
        candidates.push(SparseVector::from_dense(e, k));
    }
    for c in candidates {
        if !starts.iter().any(|x| x.values == c.values) {
            starts.push(c);
        }
    }
    Ok(starts)
}

/// Runs [`truncated_power_from`] from every default start and keeps the
/// outcome with the largest final objective, the warm start winning ties.
pub(crate) fn truncated_power_multistart(
    s: ArrayView2<'_, f64>,
    k: usize,
    settings: &SolverSettings,
    dense: Option<ArrayView1<'_, f64>>,
) -> Result<SolveOutcome> {
    let mut starts = default_starts(s, k, dense, settings.seed)?.into_iter();
    let first = starts.next().expect("the warm start is always present");
    let mut best = truncated_power_from(s, k, settings, first)?;
    for start in starts {
        let Ok(out) = truncated_power_from(s, k, settings, start) else { continue };
        if final_objective(&out) > final_objective(&best) {
            best = out;
        }
    }
    Ok(best)
}

fn final_objective(out: &SolveOutcome) -> f64 {
    *out.objective_path.last().expect("objective path holds the initial value")
}

pub(crate) fn truncated_power_from(
    s: ArrayView2<'_, f64>,
    k: usize,
    settings: &SolverSettings,
    start: SparseVector,
) -> Result<SolveOutcome> {
    settings.validate()?;
    check_cardinality(k, s.nrows())?;

    let mut u = start;
    let mut su = matvec_on_support(s, u.values.view(), &u.support);
    let mut path = vec![u.values.dot(&su)];
    let mut restarts = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        let n = norm2(su.view());
        if !(n > DEGENERATE_NORM) {
            if restarts == MAX_RESTARTS {
                return Err(Error::DegenerateIterate { threshold: DEGENERATE_NORM, restarts });
            }
            restarts += 1;
            u = perturbed(u.values.view(), k, restart_seed(settings.seed, restarts))?;
            su = matvec_on_support(s, u.values.view(), &u.support);
            continue;
        }
        iterations += 1;
        let next = truncate_top_k((su / n).view(), k)?.normalized();
        let step = sup_distance(next.values.view(), u.values.view());
        u = next;
        su = matvec_on_support(s, u.values.view(), &u.support);
        path.push(u.values.dot(&su));
        if step <= settings.epsilon {
            converged = true;
            break;
        }
    }

    Ok(SolveOutcome { vector: sign_normalize(u), converged, iterations, restarts, objective_path: path })
}

/// `(B^{1/2}, B^{+1/2})` of a symmetric PSD matrix from its eigen-decomposition.
/// Eigenvalues below `tol * largest` get a zero reciprocal root.
pub fn pseudo_sqrt_pair(b: ArrayView2<'_, f64>, tol: f64) -> Result<(Array2<f64>, Array2<f64>)> {
    if b.nrows() != b.ncols() {
        return Err(Error::Dimension(format!("B must be square, got {:?}", b.dim())));
    }
    if linalg::relative_asymmetry(b) > 1e-8 {
        return Err(Error::Precondition("B is not symmetric".into()));
    }
    let (vals, vecs) = linalg::symmetric_eigen(b);
    let largest = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if vals.iter().any(|&v| v < -1e-8 * largest.max(1.0)) {
        return Err(Error::Precondition("B is not positive semi-definite".into()));
    }
    let cutoff = tol * largest;
    let root = vals.mapv(|v| v.max(0.0).sqrt());
    let inv_root = vals.mapv(|v| if v > cutoff { 1.0 / v.sqrt() } else { 0.0 });
    let half = (&vecs * &root).dot(&vecs.t());
    let half_pinv = (&vecs * &inv_root).dot(&vecs.t());
    Ok((half, half_pinv))
}

/// Generalized truncated power iteration for `max v'Sv` subject to
/// `v'Bv = 1` and `|v|_0 <= s`.
///
/// With `A = B^{+1/2} S B^{+1/2}` each step maps `x` to
/// `B^{+1/2} A x / |A x|`, truncates it to `s` entries (`x*`) and continues
/// from `B^{1/2} x* / |B^{1/2} x*|`. The returned vector is the last `x*`,
/// before any `B`-normalisation.
pub fn generalized_truncated_power(
    s: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    k: usize,
    settings: &SolverSettings,
) -> Result<SolveOutcome> {
    settings.validate()?;
    let dim = s.nrows();
    if s.ncols() != dim || b.dim() != (dim, dim) {
        return Err(Error::Dimension("S and B must be square and conformable".into()));
    }
    check_cardinality(k, dim)?;
    let (half, half_pinv) = pseudo_sqrt_pair(b, settings.pseudo_inverse_tolerance)?;
    let mut a = half_pinv.dot(&s).dot(&half_pinv);
    crate::panel::symmetrize(&mut a);
    generalized_power_core(a.view(), s, half.view(), half_pinv.view(), k, settings)
}

/// Iteration shared by [`generalized_truncated_power`] and the deflation
/// sequence, with `A` and both roots supplied by the caller. `s` is only used
/// for the objective. Runs from the default starts built on `A` and keeps the
/// best final objective.
fn generalized_power_core(
    a: ArrayView2<'_, f64>,
    s: ArrayView2<'_, f64>,
    half: ArrayView2<'_, f64>,
    half_pinv: ArrayView2<'_, f64>,
    k: usize,
    settings: &SolverSettings,
) -> Result<SolveOutcome> {
    let mut starts = default_starts(a, k, None, settings.seed)?.into_iter();
    let first = starts.next().expect("the warm start is always present");
    let mut best = generalized_power_from(a, s, half, half_pinv, k, settings, first, true)?;
    for start in starts {
        let Ok(out) = generalized_power_from(a, s, half, half_pinv, k, settings, start, false) else { continue };
        if final_objective(&out) > final_objective(&best) {
            best = out;
        }
    }
    Ok(best)
}

/// One run of the generalized iteration. Without `random_fallback` a start
/// lying in the null space of `B` is an error instead of being replaced.
#[allow(clippy::too_many_arguments)]
fn generalized_power_from(
    a: ArrayView2<'_, f64>,
    s: ArrayView2<'_, f64>,
    half: ArrayView2<'_, f64>,
    half_pinv: ArrayView2<'_, f64>,
    k: usize,
    settings: &SolverSettings,
    start: SparseVector,
    random_fallback: bool,
) -> Result<SolveOutcome> {
    let dim = a.nrows();
    let objective = |xs: &SparseVector, bx_norm: f64| {
        let sx = matvec_on_support(s, xs.values.view(), &xs.support);
        xs.values.dot(&sx) / (bx_norm * bx_norm)
    };
    // Maps a truncated vector to the next iterate B^{1/2} x* / |B^{1/2} x*|.
    let lift = |xs: &SparseVector| -> Option<(Array1<f64>, f64)> {
        let bx = matvec_on_support(half.t(), xs.values.view(), &xs.support);
        let n = norm2(bx.view());
        (n > DEGENERATE_NORM).then(|| (bx / n, n))
    };

    let mut restarts = 0;
    let mut xs = start;
    let (mut x, bn0) = loop {
        if let Some(pair) = lift(&xs) {
            break pair;
        }
        if !random_fallback || restarts == MAX_RESTARTS {
            return Err(Error::DegenerateIterate { threshold: DEGENERATE_NORM, restarts });
        }
        restarts += 1;
        xs = truncate_top_k(random_unit(dim, restart_seed(settings.seed, restarts)).view(), k)?.normalized();
    };
    let mut path = vec![objective(&xs, bn0)];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < settings.max_iterations {
        let ax = a.dot(&x);
        let n = norm2(ax.view());
        if !(n > DEGENERATE_NORM) {
            if restarts == MAX_RESTARTS {
                return Err(Error::DegenerateIterate { threshold: DEGENERATE_NORM, restarts });
            }
            restarts += 1;
            let p = perturbed(x.view(), k, restart_seed(settings.seed, restarts))?;
            if let Some((nx, _)) = lift(&p) {
                xs = p;
                x = nx;
            }
            continue;
        }
        iterations += 1;
        let tilde = half_pinv.dot(&(ax / n));
        let candidate = truncate_top_k(tilde.view(), k)?;
        let Some((next, nb)) = lift(&candidate) else {
            if restarts == MAX_RESTARTS {
                return Err(Error::DegenerateIterate { threshold: DEGENERATE_NORM, restarts });
            }
            restarts += 1;
            let p = perturbed(x.view(), k, restart_seed(settings.seed, restarts))?;
            if let Some((nx, _)) = lift(&p) {
                xs = p;
                x = nx;
            }
            continue;
        };
        let step = sup_distance(next.view(), x.view());
        xs = candidate;
        x = next;
        path.push(objective(&xs, nb));
        if step <= settings.epsilon {
            converged = true;
            break;
        }
    }

    Ok(SolveOutcome { vector: sign_normalize(xs), converged, iterations, restarts, objective_path: path })
}

/// Deflation bookkeeping: the current deflated gram, `B_i`, and the `q_j`
/// collected so far.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflationState {
    deflated_gram: Array2<f64>,
    b_matrix: Array2<f64>,
    q_vectors: Vec<Array1<f64>>,
}

impl DeflationState {
    /// Initial state: `B_1 = I`, nothing deflated yet.
    pub fn new(s: ArrayView2<'_, f64>) -> Result<Self> {
        let dim = s.nrows();
        if s.ncols() != dim {
            return Err(Error::Dimension(format!("S must be square, got {:?}", s.dim())));
        }
        Ok(Self { deflated_gram: s.to_owned(), b_matrix: Array2::eye(dim), q_vectors: Vec::new() })
    }

    pub fn deflated_gram(&self) -> ArrayView2<'_, f64> {
        self.deflated_gram.view()
    }

    pub fn b_matrix(&self) -> ArrayView2<'_, f64> {
        self.b_matrix.view()
    }

    pub fn q_vectors(&self) -> &[Array1<f64>] {
        &self.q_vectors
    }

    /// `(|B^2 - B|_F, |B - B'|_F)`.
    pub fn b_defects(&self) -> (f64, f64) {
        let b = &self.b_matrix;
        let idem = linalg::frobenius_norm((b.dot(b) - b).view());
        let sym = linalg::frobenius_norm((b - &b.t()).view());
        (idem, sym)
    }

    /// Projection checks against a fixed probe vector, `O(T^2)` instead of
    /// the `O(T^3)` of [`Self::b_defects`].
    fn check_invariants(&self) -> Result<()> {
        let dim = self.b_matrix.nrows();
        let z = Array1::from_shape_fn(dim, |i| 1.0 + ((i * 7919) % 113) as f64 / 113.0);
        let bz = self.b_matrix.dot(&z);
        let scale = norm2(z.view());
        let idem = norm2((self.b_matrix.dot(&bz) - &bz).view()) / scale;
        let sym = norm2((self.b_matrix.t().dot(&z) - &bz).view()) / scale;
        if idem > 1e-8 || sym > 1e-8 {
            return Err(Error::Numerical(format!(
                "B lost projection structure: |B^2 z-Bz|={idem:e}, |B'z-Bz|={sym:e}"
            )));
        }
        if linalg::relative_asymmetry(self.deflated_gram.view()) > 1e-10 {
            return Err(Error::Numerical("deflated gram lost symmetry".into()));
        }
        Ok(())
    }
}

/// One deflation step with a `B`-normalised vector (`v'Bv = 1`):
/// `q = Bv`, `S <- (I - qq') S (I - qq')`, `B <- B (I - qq')`.
pub fn deflate(state: &DeflationState, v_hat: ArrayView1<'_, f64>) -> Result<DeflationState> {
    let dim = state.b_matrix.nrows();
    if v_hat.len() != dim {
        return Err(Error::Dimension(format!("vector has length {}, expected {dim}", v_hat.len())));
    }
    let q = state.b_matrix.dot(&v_hat);
    let quad = v_hat.dot(&q);
    if (quad - 1.0).abs() > 1e-6 {
        return Err(Error::Numerical(format!("v'Bv = {quad}, expected 1")));
    }

    let s = &state.deflated_gram;
    let w = s.dot(&q);
    let c = q.dot(&w);
    let mut next_s = s.clone();
    for i in 0..dim {
        for j in i..dim {
            let v = next_s[[i, j]] + c * q[i] * q[j] - q[i] * w[j] - w[i] * q[j];
            next_s[[i, j]] = v;
            next_s[[j, i]] = v;
        }
    }

    let bq = state.b_matrix.dot(&q);
    let mut next_b = state.b_matrix.clone();
    for i in 0..dim {
        for j in 0..dim {
            next_b[[i, j]] -= bq[i] * q[j];
        }
    }

    let mut q_vectors = state.q_vectors.clone();
    q_vectors.push(q);
    let next = DeflationState { deflated_gram: next_s, b_matrix: next_b, q_vectors };
    next.check_invariants()?;
    Ok(next)
}

/// Output of [`sparse_eigen_sequence`]: unit vectors plus per-vector solver
/// metadata, in extraction order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEigenSequence {
    pub vectors: Vec<SparseVector>,
    pub outcomes: Vec<SolveOutcome>,
    /// State after deflating the last vector; `None` when the caller only
    /// needed the vectors.
    pub final_state: Option<DeflationState>,
}

impl SparseEigenSequence {
    pub fn converged(&self) -> Vec<bool> {
        self.outcomes.iter().map(|o| o.converged).collect()
    }
}

/// Extracts `sparsities.len()` sparse eigenvectors by sequential deflation.
///
/// The first vector comes from [`truncated_power`]; later ones from the
/// generalized iteration on the deflated gram. Because every `B_i` built by
/// [`deflate`] is verified to be an orthogonal projection, its pseudo square
/// root and pseudo inverse root are `B_i` itself and `B_i S_i B_i = S_i`, so
/// the iteration runs on the deflated gram directly.
pub fn sparse_eigen_sequence(
    s: &GramMatrix,
    sparsities: &[usize],
    settings: &SolverSettings,
) -> Result<SparseEigenSequence> {
    sparse_eigen_sequence_with_start(s.values(), sparsities, settings, None, true)
}

/// As [`sparse_eigen_sequence`], optionally reusing a precomputed dense
/// leading vector of `S` for the first warm start. With `keep_final_state`
/// unset the last deflation is skipped.
pub(crate) fn sparse_eigen_sequence_with_start(
    s: ArrayView2<'_, f64>,
    sparsities: &[usize],
    settings: &SolverSettings,
    dense_start: Option<ArrayView1<'_, f64>>,
    keep_final_state: bool,
) -> Result<SparseEigenSequence> {
    settings.validate()?;
    if sparsities.is_empty() {
        return Err(Error::Dimension("at least one sparsity level is required".into()));
    }
    let dim = s.nrows();
    if s.ncols() != dim {
        return Err(Error::Dimension(format!("S must be square, got {:?}", s.dim())));
    }
    for &k in sparsities {
        check_cardinality(k, dim)?;
    }

    let needs_state = keep_final_state || sparsities.len() > 1;
    let mut state = if needs_state { Some(DeflationState::new(s)?) } else { None };
    let mut vectors = Vec::with_capacity(sparsities.len());
    let mut outcomes = Vec::with_capacity(sparsities.len());
    for (i, &k) in sparsities.iter().enumerate() {
        let outcome = match (&state, i) {
            (_, 0) => truncated_power_multistart(s, k, settings, dense_start)?,
            (Some(st), _) => {
                let b = st.b_matrix.view();
                generalized_power_core(st.deflated_gram.view(), s, b, b, k, settings)?
            }
            (None, _) => unreachable!("state exists whenever more than one vector is requested"),
        };

        let last = i + 1 == sparsities.len();
        if let Some(st) = state.as_ref().filter(|_| keep_final_state || !last) {
            let v = outcome.vector.values();
            let bv = st.b_matrix.dot(&v);
            let quad = v.dot(&bv);
            if !(quad > DEGENERATE_NORM) {
                return Err(Error::Numerical(format!("vector {i} lies in the null space of B")));
            }
            let v_b = &v / quad.sqrt();
            state = Some(deflate(st, v_b.view())?);
        }
        vectors.push(outcome.vector.normalized());
        outcomes.push(outcome);
    }
    Ok(SparseEigenSequence { vectors, outcomes, final_state: state.filter(|_| keep_final_state) })
}
