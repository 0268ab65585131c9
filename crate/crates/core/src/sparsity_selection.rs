//! Cross-sectional cross-validation for the sparsity level `s`.
//!
//! The panel's series are split into a training half and a testing half.
//! Factors estimated on the training half are scored by how well they span
//! the testing half, and a penalty growing in `s` guards against overfit.

use ndarray::{Array1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor_model::design_inverse;
use crate::panel::{gram_of, Panel};
use crate::sparse_eigen::{dense_leading_vector, sparse_eigen_sequence_with_start, SolverSettings};

/// Log criteria floor the testing error at this multiple of the test panel's
/// mean square so that exact fits do not send `ln R` to minus infinity.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    /// `R(s) + r s g(N1, T)`.
    PcLinear,
    /// `ln R(s) + r s g(N1, T)`.
    IcLog,
    /// `ln R(s) + r (s / sqrt(T)) g(N1, T)`, for `s` growing like `sqrt(T)`.
    IcLogScaled,
}

impl PenaltyKind {
    pub fn penalty(self, r: usize, s: usize, n1: usize, t: usize) -> f64 {
        let g = penalty_g(n1, t);
        let rf = r as f64;
        match self {
            PenaltyKind::PcLinear | PenaltyKind::IcLog => rf * s as f64 * g,
            PenaltyKind::IcLogScaled => rf * (s as f64 / (t as f64).sqrt()) * g,
        }
    }

    fn transform(self, error: f64, floor: f64) -> f64 {
        match self {
            PenaltyKind::PcLinear => error,
            PenaltyKind::IcLog | PenaltyKind::IcLogScaled => error.max(floor).ln(),
        }
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pc_linear" => Ok(Self::PcLinear),
            "ic_log" => Ok(Self::IcLog),
            "ic_log_scaled" => Ok(Self::IcLogScaled),
            other => Err(Error::Config(format!("unknown penalty kind {other:?}"))),
        }
    }
}

/// `g(N1, T) = ((N1 + T) / (N1 T)) ln(N1 T / (N1 + T))`.
pub fn penalty_g(n1: usize, t: usize) -> f64 {
    let (a, b) = (n1 as f64, t as f64);
    (a + b) / (a * b) * (a * b / (a + b)).ln()
}

/// Candidate grid `[ceil(sqrt T) - 10, ceil(sqrt T) + 150]` clipped to `[1, T]`.
pub fn default_grid(t: usize) -> Vec<usize> {
    let centre = (t as f64).sqrt().ceil() as usize;
    let lo = centre.saturating_sub(10).max(1);
    let hi = (centre + 150).min(t);
    (lo..=hi).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossSectionSplit {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Seed the split family was drawn from.
    pub seed: u64,
    /// Position of this split within its family.
    pub index: usize,
}

/// `J` uniformly random splits of `0..N`. Training halves get `ceil(N/2)`
/// units; the sequence is reproducible from `seed`.
pub fn make_splits(n: usize, j: usize, seed: u64) -> Result<Vec<CrossSectionSplit>> {
    if n < 4 {
        return Err(Error::Dimension(format!("cross-validation needs N >= 4, got {n}")));
    }
    if j == 0 {
        return Err(Error::Dimension("J must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_train = n.div_ceil(2);
    let splits = (0..j)
        .map(|index| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut train = perm[..n_train].to_vec();
            let mut test = perm[n_train..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            CrossSectionSplit { train_indices: train, test_indices: test, seed, index }
        })
        .collect();
    Ok(splits)
}

/// Mean squared residual of projecting the test panel on the training
/// factors: `|X2 - F (F'F)^{-1} F' X2|_F^2 / (N2 T)`.
pub fn testing_error(train_factors: ArrayView2<'_, f64>, test_panel: ArrayView2<'_, f64>) -> Result<f64> {
    let (t, n2) = test_panel.dim();
    if train_factors.nrows() != t {
        return Err(Error::Dimension(format!("factors have {} rows, test panel {t}", train_factors.nrows())));
    }
    let (inv, _) = design_inverse(train_factors)?;
    let coef = inv.dot(&train_factors.t().dot(&test_panel));
    let resid = &test_panel - &train_factors.dot(&coef);
    Ok(resid.iter().map(|v| v * v).sum::<f64>() / (n2 * t) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedCandidate {
    pub s: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsitySelectionReport {
    /// Candidates that were evaluated on every split, ascending.
    pub candidate_grid: Vec<usize>,
    /// Average testing error `R^J(s)` per candidate.
    pub raw_errors: Vec<f64>,
    pub penalties: Vec<f64>,
    pub criterion_values: Vec<f64>,
    pub selected: usize,
    pub j_partitions: usize,
    pub penalty_kind: PenaltyKind,
    pub r: usize,
    pub n_train: usize,
    pub t: usize,
    /// Floor applied to `R^J(s)` before taking logs.
    pub error_floor: f64,
    /// The selection sits on the first or last grid value.
    pub boundary_hit: bool,
    pub excluded: Vec<ExcludedCandidate>,
}

impl SparsitySelectionReport {
    /// Recomputes the criterion from the stored raw errors and penalties.
    pub fn recompute_criterion(&self) -> Vec<f64> {
        self.raw_errors
            .iter()
            .zip(&self.penalties)
            .map(|(&e, &p)| self.penalty_kind.transform(e, self.error_floor) + p)
            .collect()
    }
}

/// Chooses `s` from `grid` by `J`-fold random cross-sectional splitting.
pub fn select_sparsity(
    panel: &Panel,
    r: usize,
    grid: &[usize],
    j: usize,
    penalty: PenaltyKind,
    settings: &SolverSettings,
    seed: u64,
) -> Result<SparsitySelectionReport> {
    let splits = make_splits(panel.n(), j, seed)?;
    select_sparsity_with_splits(panel, r, grid, &splits, penalty, settings)
}

/// As [`select_sparsity`] with caller-supplied splits.
pub fn select_sparsity_with_splits(
    panel: &Panel,
    r: usize,
    grid: &[usize],
    splits: &[CrossSectionSplit],
    penalty: PenaltyKind,
    settings: &SolverSettings,
) -> Result<SparsitySelectionReport> {
    if !panel.is_centered() {
        return Err(Error::Precondition("sparsity selection requires a centred panel".into()));
    }
    select_on_values(panel.values(), r, grid, splits, penalty, settings)
}

/// Selection on raw values, centred or not.
pub(crate) fn select_on_values(
    x: ArrayView2<'_, f64>,
    r: usize,
    grid: &[usize],
    splits: &[CrossSectionSplit],
    penalty: PenaltyKind,
    settings: &SolverSettings,
) -> Result<SparsitySelectionReport> {
    settings.validate()?;
    let t = x.nrows();
    if r == 0 {
        return Err(Error::Dimension("r must be at least 1".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::Config("sparsity grid is empty".into()));
    }
    if let Some(&bad) = grid.iter().find(|&&s| s == 0 || s > t) {
        return Err(Error::Dimension(format!("grid value {bad} outside 1..={t}")));
    }
    if splits.is_empty() {
        return Err(Error::Dimension("at least one split is required".into()));
    }
    let n_train = splits[0].train_indices.len();
    for sp in splits {
        check_split(sp, x.ncols())?;
        if sp.train_indices.len() != n_train {
            return Err(Error::Dimension("splits have different training sizes".into()));
        }
    }

    // Per-split training gram and its dense warm start, shared by all candidates.
    let prepared: Vec<PreparedSplit> = splits.par_iter().map(|sp| PreparedSplit::new(x, sp)).collect();

    // Split-major order; collect() keeps it regardless of scheduling.
    let cells: Vec<(usize, usize)> = (0..prepared.len()).flat_map(|j| (0..grid.len()).map(move |c| (j, c))).collect();
    let errors: Vec<std::result::Result<f64, String>> = cells
        .par_iter()
        .map(|&(j, c)| prepared[j].error_for(grid[c], r, settings).map_err(|e| e.to_string()))
        .collect();

    let mut kept_grid = Vec::new();
    let mut raw_errors = Vec::new();
    let mut excluded = Vec::new();
    for (c, &s) in grid.iter().enumerate() {
        let mut sum = 0.0;
        let mut failure = None;
        for j in 0..prepared.len() {
            match &errors[j * grid.len() + c] {
                Ok(e) => sum += e,
                Err(msg) => {
                    failure = Some(format!("split {j}: {msg}"));
                    break;
                }
            }
        }
        match failure {
            None => {
                kept_grid.push(s);
                raw_errors.push(sum / prepared.len() as f64);
            }
            Some(reason) => excluded.push(ExcludedCandidate { s, reason }),
        }
    }
    if kept_grid.is_empty() {
        return Err(Error::Numerical("every sparsity candidate failed".into()));
    }

    let mean_square = prepared.iter().map(|p| p.test_mean_square).sum::<f64>() / prepared.len() as f64;
    let error_floor = RELATIVE_ERROR_FLOOR * mean_square.max(f64::MIN_POSITIVE);
    let penalties: Vec<f64> = kept_grid.iter().map(|&s| penalty.penalty(r, s, n_train, t)).collect();
    let criterion_values: Vec<f64> =
        raw_errors.iter().zip(&penalties).map(|(&e, &p)| penalty.transform(e, error_floor) + p).collect();
    let mut best = 0;
    for (i, v) in criterion_values.iter().enumerate() {
        if *v < criterion_values[best] {
            best = i;
        }
    }
    let selected = kept_grid[best];
    let boundary_hit = grid.len() > 1 && (selected == grid[0] || selected == grid[grid.len() - 1]);
    Ok(SparsitySelectionReport {
        candidate_grid: kept_grid,
        raw_errors,
        penalties,
        criterion_values,
        selected,
        j_partitions: splits.len(),
        penalty_kind: penalty,
        r,
        n_train,
        t,
        error_floor,
        boundary_hit,
        excluded,
    })
}

fn check_split(sp: &CrossSectionSplit, n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in sp.train_indices.iter().chain(&sp.test_indices) {
        if i >= n || seen[i] {
            return Err(Error::Dimension(format!("split {} is not a partition of 0..{n}", sp.index)));
        }
        seen[i] = true;
    }
    if seen.iter().any(|s| !s) || sp.train_indices.is_empty() || sp.test_indices.is_empty() {
        return Err(Error::Dimension(format!("split {} is not a partition of 0..{n}", sp.index)));
    }
    Ok(())
}

struct PreparedSplit {
    train_gram: ndarray::Array2<f64>,
    dense_start: Option<Array1<f64>>,
    test: ndarray::Array2<f64>,
    test_mean_square: f64,
}

impl PreparedSplit {
    fn new(x: ArrayView2<'_, f64>, split: &CrossSectionSplit) -> Self {
        let train = x.select(Axis(1), &split.train_indices);
        let test = x.select(Axis(1), &split.test_indices);
        let train_gram = gram_of(train.view()).into_values();
        let dense_start = dense_leading_vector(train_gram.view());
        let test_mean_square = test.iter().map(|v| v * v).sum::<f64>() / test.len() as f64;
        Self { train_gram, dense_start, test, test_mean_square }
    }

    fn error_for(&self, s: usize, r: usize, settings: &SolverSettings) -> Result<f64> {
        let t = self.train_gram.nrows();
        let seq = sparse_eigen_sequence_with_start(
            self.train_gram.view(),
            &vec![s; r],
            settings,
            self.dense_start.as_ref().map(|d| d.view()),
            false,
        )?;
        let scale = (t as f64).sqrt();
        let mut f = ndarray::Array2::zeros((t, r));
        for (k, v) in seq.vectors.iter().enumerate() {
            f.column_mut(k).assign(&(&v.values() * scale));
        }
        testing_error(f.view(), self.test.view())
    }
}
