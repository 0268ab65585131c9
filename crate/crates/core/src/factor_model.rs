//! Sparse factor estimation, OLS loadings, factor-count selection and
//! subspace distances.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::panel::{gram_of, gram_spectrum, scaled_gram, GramMatrix, Panel};
use crate::sparse_eigen::{sparse_eigen_sequence, SolveOutcome, SolverSettings, SparseEigenSequence};

/// Loadings regressions refuse designs worse conditioned than this.
pub const MAX_DESIGN_CONDITION: f64 = 1e12;

/// `T×r` factors with column `i` equal to `sqrt(T)` times the `i`-th unit
/// sparse eigenvector, so that `diag(F'F)/T = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFactorSet {
    factors: Array2<f64>,
    supports: Vec<Vec<usize>>,
    sparsities: Vec<usize>,
    converged: Vec<bool>,
}

impl SparseFactorSet {
    /// Builds the set from unit sparse eigenvectors.
    pub fn from_sequence(seq: &SparseEigenSequence, sparsities: &[usize]) -> Result<Self> {
        let t = seq.vectors.first().map(|v| v.len()).unwrap_or(0);
        let r = seq.vectors.len();
        if r == 0 || sparsities.len() != r {
            return Err(Error::Dimension(format!("{r} vectors for {} sparsities", sparsities.len())));
        }
        let scale = (t as f64).sqrt();
        let mut factors = Array2::zeros((t, r));
        for (j, v) in seq.vectors.iter().enumerate() {
            factors.column_mut(j).assign(&(&v.values() * scale));
        }
        Ok(Self {
            factors,
            supports: seq.vectors.iter().map(|v| v.support().to_vec()).collect(),
            sparsities: sparsities.to_vec(),
            converged: seq.converged(),
        })
    }

    /// Wraps an arbitrary factor matrix; supports are read off the nonzeros.
    pub fn from_matrix(factors: Array2<f64>, sparsities: Vec<usize>) -> Result<Self> {
        if sparsities.len() != factors.ncols() {
            return Err(Error::Dimension(format!("{} sparsities for {} factors", sparsities.len(), factors.ncols())));
        }
        let supports: Vec<Vec<usize>> = factors
            .columns()
            .into_iter()
            .map(|c| c.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect())
            .collect();
        for (j, (sup, &s)) in supports.iter().zip(&sparsities).enumerate() {
            if sup.len() > s {
                return Err(Error::Precondition(format!("factor {j} has {} nonzeros, bound {s}", sup.len())));
            }
        }
        let converged = vec![true; factors.ncols()];
        Ok(Self { factors, supports, sparsities, converged })
    }

    pub fn factors(&self) -> ArrayView2<'_, f64> {
        self.factors.view()
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn sparsities(&self) -> &[usize] {
        &self.sparsities
    }

    pub fn converged(&self) -> &[bool] {
        &self.converged
    }

    pub fn r(&self) -> usize {
        self.factors.ncols()
    }
}

/// `N×r` loadings with optional iid-noise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingMatrix {
    pub loadings: Array2<f64>,
    /// `None` when standard errors were not computed.
    pub standard_errors: Option<Array2<f64>>,
    /// Residual variances `(1/T) sum_t e_it^2`.
    pub noise_variances: Option<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub factor_set: SparseFactorSet,
    pub loading_matrix: LoadingMatrix,
    /// `X - F Λ'`.
    pub residuals: Array2<f64>,
    /// The `T` eigenvalues of `XX'`, descending.
    pub gram_eigenvalues: Vec<f64>,
    pub r: usize,
    pub solver_outcomes: Vec<SolveOutcome>,
}

impl ModelFit {
    /// Share of total variation captured by the common component.
    pub fn explained_variance_ratio(&self, panel: &Panel) -> f64 {
        let total: f64 = panel.values().iter().map(|v| v * v).sum();
        if total == 0.0 {
            return 0.0;
        }
        let resid: f64 = self.residuals.iter().map(|v| v * v).sum();
        1.0 - resid / total
    }
}

/// Full pipeline on a centred panel: sparse eigenvectors of `S`, factors
/// `sqrt(T) v_i`, OLS loadings and residuals.
pub fn estimate(panel: &Panel, r: usize, sparsities: &[usize], settings: &SolverSettings) -> Result<ModelFit> {
    if r == 0 {
        return Err(Error::Dimension("r must be at least 1".into()));
    }
    if sparsities.len() != r {
        return Err(Error::Dimension(format!("{} sparsities given for r={r}", sparsities.len())));
    }
    let gram = scaled_gram(panel)?;
    fit_from_gram(panel.values(), &gram, sparsities, settings)
}

/// As [`estimate`] but on raw values, centred or not.
pub(crate) fn estimate_uncentred(
    x: ArrayView2<'_, f64>,
    sparsities: &[usize],
    settings: &SolverSettings,
) -> Result<ModelFit> {
    fit_from_gram(x, &gram_of(x), sparsities, settings)
}

fn fit_from_gram(
    x: ArrayView2<'_, f64>,
    gram: &GramMatrix,
    sparsities: &[usize],
    settings: &SolverSettings,
) -> Result<ModelFit> {
    let seq = sparse_eigen_sequence(gram, sparsities, settings)?;
    let factor_set = SparseFactorSet::from_sequence(&seq, sparsities)?;
    let loading_matrix = loadings_of(x, &factor_set)?;
    let residuals = residuals_of(x, factor_set.factors(), loading_matrix.loadings.view());
    Ok(ModelFit {
        factor_set,
        loading_matrix,
        residuals,
        gram_eigenvalues: gram_spectrum(x),
        r: sparsities.len(),
        solver_outcomes: seq.outcomes,
    })
}

fn residuals_of(x: ArrayView2<'_, f64>, f: ArrayView2<'_, f64>, l: ArrayView2<'_, f64>) -> Array2<f64> {
    &x - &f.dot(&l.t())
}

/// OLS loadings `Λ' = (F'F)^{-1} F'X` with standard errors
/// `σ_i sqrt(diag((F'F)^{-1}))`, where `σ_i^2` is the mean squared residual
/// of series `i`.
pub fn estimate_loadings(panel: &Panel, factor_set: &SparseFactorSet) -> Result<LoadingMatrix> {
    loadings_of(panel.values(), factor_set)
}

fn loadings_of(x: ArrayView2<'_, f64>, factor_set: &SparseFactorSet) -> Result<LoadingMatrix> {
    let f = factor_set.factors();
    if f.nrows() != x.nrows() {
        return Err(Error::Dimension(format!("factors have {} rows, panel has {}", f.nrows(), x.nrows())));
    }
    let (ftf_inv, _) = design_inverse(f)?;
    let loadings = x.t().dot(&f).dot(&ftf_inv);
    let resid = residuals_of(x, f, loadings.view());
    let t = x.nrows() as f64;
    let noise = resid.map_axis(Axis(0), |col| col.dot(&col) / t);
    let diag = ftf_inv.diag().mapv(f64::sqrt);
    let se = Array2::from_shape_fn(loadings.dim(), |(i, k)| noise[i].sqrt() * diag[k]);
    Ok(LoadingMatrix { loadings, standard_errors: Some(se), noise_variances: Some(noise) })
}

/// `(F'F)^{-1}` and its condition number, refusing near-singular designs.
pub(crate) fn design_inverse(f: ArrayView2<'_, f64>) -> Result<(Array2<f64>, f64)> {
    let ftf = f.t().dot(&f);
    match linalg::spd_inverse(ftf.view()) {
        Ok((inv, cond)) if cond < MAX_DESIGN_CONDITION => Ok((inv, cond)),
        Ok((_, cond)) => Err(Error::SingularDesign { condition: cond, limit: MAX_DESIGN_CONDITION }),
        Err(_) => Err(Error::SingularDesign { condition: f64::INFINITY, limit: MAX_DESIGN_CONDITION }),
    }
}

/// `F Λ'`.
pub fn common_component(fit: &ModelFit) -> Array2<f64> {
    fit.factor_set.factors().dot(&fit.loading_matrix.loadings.t())
}

/// Default upper bound `floor(min(T, N) / 3)`, at least 1.
pub fn default_k_max(t: usize, n: usize) -> usize {
    (t.min(n) / 3).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorCountMethod {
    EigenvalueRatio,
    InformationCriterion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorCountSelection {
    pub method: FactorCountMethod,
    pub selected: usize,
    pub k_max: usize,
    /// Criterion value for `k = 1..=k_max`: eigenvalue ratios or IC values.
    pub criterion: Vec<f64>,
}

/// Ratios `λ_{k+1}/λ_k` for `k = 1..=k_max`. Eigenvalues are floored at
/// `1e-12 λ_1` before forming the ratio.
pub fn eigenvalue_ratios(eigenvalues: &[f64], k_max: usize) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(Error::Dimension("K must be at least 1".into()));
    }
    if eigenvalues.len() < k_max + 1 {
        return Err(Error::Dimension(format!(
            "need {} eigenvalues for K={k_max}, got {}",
            k_max + 1,
            eigenvalues.len()
        )));
    }
    let lead = eigenvalues[0];
    if !(lead > 0.0) {
        return Err(Error::DegenerateSpectrum);
    }
    let floor = 1e-12 * lead;
    Ok((0..k_max).map(|k| eigenvalues[k + 1].max(floor) / eigenvalues[k].max(floor)).collect())
}

/// `argmin_{1<=k<=K} λ_{k+1}/λ_k` over a descending spectrum; ties go to the
/// smallest `k`.
pub fn select_num_factors_ratio(eigenvalues: &[f64], k_max: usize) -> Result<FactorCountSelection> {
    let ratios = eigenvalue_ratios(eigenvalues, k_max)?;
    let selected = argmin_first(&ratios) + 1;
    Ok(FactorCountSelection { method: FactorCountMethod::EigenvalueRatio, selected, k_max, criterion: ratios })
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Information criterion
/// `IC(k) = ln(|X - F_k Λ_k'|_F^2 / (NT)) + k (N+T)/(NT) ln(NT/(N+T))`
/// with `F_k` the dense (non-sparse) principal-component factors.
///
/// For orthonormal eigenvectors `u_j` of `XX'` the OLS residual sum of
/// squares is `|X|_F^2 - sum_{j<=k} |X'u_j|^2`; the fits are evaluated that
/// way. A perfect fit returns the smallest `k` achieving it.
pub fn select_num_factors_ic(panel: &Panel, k_max: usize) -> Result<FactorCountSelection> {
    if !panel.is_centered() {
        return Err(Error::Precondition("information criterion requires a centred panel".into()));
    }
    let x = panel.values();
    let (t, n) = x.dim();
    if k_max == 0 || k_max > t.min(n) {
        return Err(Error::Dimension(format!("K={k_max} outside 1..={}", t.min(n))));
    }
    let total: f64 = x.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    let vectors = leading_time_eigenvectors(x, k_max);
    let (nf, tf) = (n as f64, t as f64);
    let penalty = (nf + tf) / (nf * tf) * (nf * tf / (nf + tf)).ln();

    let mut rss = total;
    let mut criterion = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let proj = x.t().dot(&vectors.column(k));
        rss -= proj.dot(&proj);
        if rss <= 1e-14 * total {
            criterion.push(f64::NEG_INFINITY);
            return Ok(FactorCountSelection {
                method: FactorCountMethod::InformationCriterion,
                selected: k + 1,
                k_max,
                criterion,
            });
        }
        criterion.push((rss / (nf * tf)).ln() + (k + 1) as f64 * penalty);
    }
    let selected = argmin_first(&criterion) + 1;
    Ok(FactorCountSelection { method: FactorCountMethod::InformationCriterion, selected, k_max, criterion })
}

/// Top-`k` orthonormal eigenvectors of `XX'` (as `T`-vectors), computed from
/// the smaller of `XX'` and `X'X`.
pub(crate) fn leading_time_eigenvectors(x: ArrayView2<'_, f64>, k: usize) -> Array2<f64> {
    let (t, n) = x.dim();
    if t <= n {
        let mut g = x.dot(&x.t());
        crate::panel::symmetrize(&mut g);
        let (_, vecs) = linalg::symmetric_eigen(g.view());
        return vecs.slice(ndarray::s![.., ..k]).to_owned();
    }
    let mut g = x.t().dot(&x);
    crate::panel::symmetrize(&mut g);
    let (vals, vecs) = linalg::symmetric_eigen(g.view());
    let mut out = Array2::zeros((t, k));
    for j in 0..k {
        let u = x.dot(&vecs.column(j));
        let norm = linalg::norm2(u.view());
        if norm > 0.0 && vals[j] > 0.0 {
            out.column_mut(j).assign(&(u / norm));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// `sqrt(1 - tr(H1 H1' H2 H2')/r)`, in `[0, 1]`.
    D,
    /// `|H1 H1' - H2 H2'|_F`.
    Rho,
    /// `|sin Θ|_F` from the principal angles.
    SinTheta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubspaceDistances {
    pub d: f64,
    pub rho: f64,
    pub sin_theta: f64,
}

/// All three subspace distances between column-orthonormal `T×r` matrices.
/// The identities `ρ² = 2rD² = 2|sinΘ|_F²` are checked on the way out.
pub fn subspace_distances(h1: ArrayView2<'_, f64>, h2: ArrayView2<'_, f64>) -> Result<SubspaceDistances> {
    if h1.dim() != h2.dim() {
        return Err(Error::Dimension(format!("shapes {:?} and {:?} differ", h1.dim(), h2.dim())));
    }
    let r = h1.ncols();
    if r == 0 || r > h1.nrows() {
        return Err(Error::Dimension(format!("need 1 <= r <= T, got r={r}, T={}", h1.nrows())));
    }
    for (name, h) in [("H1", h1), ("H2", h2)] {
        let gram = h.t().dot(&h) - Array2::<f64>::eye(r);
        if linalg::max_abs(gram.view()) > 1e-8 {
            return Err(Error::Precondition(format!("{name} is not column-orthonormal")));
        }
    }
    let cross = h1.t().dot(&h2);
    let overlap: f64 = cross.iter().map(|v| v * v).sum();
    let d = (1.0 - overlap / r as f64).max(0.0).sqrt();

    let p1 = h1.dot(&h1.t());
    let p2 = h2.dot(&h2.t());
    let rho = linalg::frobenius_norm((&p1 - &p2).view());

    let sin_sq: f64 = linalg::singular_values(cross.view()).iter().map(|s| 1.0 - s.min(1.0).powi(2)).sum();
    let sin_theta = sin_sq.max(0.0).sqrt();

    let rho_sq = rho * rho;
    let scale = 1.0f64.max(rho_sq);
    if (rho_sq - 2.0 * r as f64 * d * d).abs() > 1e-8 * scale || (rho_sq - 2.0 * sin_sq).abs() > 1e-8 * scale {
        return Err(Error::Numerical("subspace distance identities disagree".into()));
    }
    Ok(SubspaceDistances { d, rho, sin_theta })
}

pub fn subspace_distance(h1: ArrayView2<'_, f64>, h2: ArrayView2<'_, f64>, kind: DistanceKind) -> Result<f64> {
    let all = subspace_distances(h1, h2)?;
    Ok(match kind {
        DistanceKind::D => all.d,
        DistanceKind::Rho => all.rho,
        DistanceKind::SinTheta => all.sin_theta,
    })
}
