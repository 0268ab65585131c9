//! Seeded Monte Carlo replications over a DGP.

use std::collections::BTreeMap;

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate, DgpConfig};
use super::ks::{ks_standard_normal, KsResult};
use super::metrics::{factor_angle_error, factor_matrix_error, recovery_rate};
use crate::error::{Error, Result};
use crate::factor_model::{default_k_max, design_inverse, estimate_uncentred, select_num_factors_ratio};
use crate::panel::{demean, gram_spectrum};
use crate::sparse_eigen::SolverSettings;
use crate::sparsity_selection::{default_grid, make_splits, select_on_values, PenaltyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Angle error `d` (one factor) and `|F̂F̂'/T - FF'/T|_F`.
    FactorError,
    /// Support recovery rate.
    Recovery,
    /// Eigenvalue-ratio estimate of `r`.
    RSelection,
    /// Cross-validated estimate of `s`.
    SSelection,
    /// Studentized first loading of the first series.
    LoadingDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSettings {
    pub solver: SolverSettings,
    /// Number of cross-sectional splits for [`Task::SSelection`].
    pub j_partitions: usize,
    pub penalty: PenaltyKind,
    /// Sparsity grid; `None` uses the default grid for `T`.
    pub grid: Option<Vec<usize>>,
    /// Upper bound for the ratio method; `None` uses `floor(min(T,N)/3)`.
    pub k_max: Option<usize>,
    /// Demean the simulated panel before estimation. The DGP has mean-zero
    /// factors, so by default the raw panel is used.
    pub center: bool,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            j_partitions: 1,
            penalty: PenaltyKind::IcLogScaled,
            grid: None,
            k_max: None,
            center: false,
        }
    }
}

/// Per-replication outcomes; fields stay `None` for tasks not requested.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub seed: u64,
    pub factor_angle_error: Option<f64>,
    pub factor_matrix_error: Option<f64>,
    pub recovery_rate: Option<f64>,
    pub r_hat: Option<usize>,
    pub s_hat: Option<usize>,
    pub loading_z: Option<f64>,
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationFailure {
    pub index: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub std_error: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, sd, std_error: sd / n.sqrt(), count: values.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub config: DgpConfig,
    pub settings: EstimatorSettings,
    pub tasks: Vec<Task>,
    pub reps: usize,
    pub completed: usize,
    pub failures: Vec<ReplicationFailure>,
    pub factor_angle_error: Option<Stat>,
    pub factor_matrix_error: Option<Stat>,
    pub recovery_rate: Option<Stat>,
    /// Empirical `P(r̂ = r)`.
    pub r_correct_probability: Option<f64>,
    pub r_hat_counts: BTreeMap<usize, usize>,
    /// Empirical `P(ŝ = s)`.
    pub s_correct_probability: Option<f64>,
    pub s_hat_counts: BTreeMap<usize, usize>,
    pub loading_z: Option<Stat>,
    pub loading_ks: Option<KsResult>,
    pub records: Vec<ReplicationRecord>,
}

/// Seed of replication `index`: `seed XOR index`.
pub fn replication_seed(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

/// Runs `reps` independent replications of `config` in parallel. Failed
/// replications are listed in the summary and left out of every statistic.
pub fn run_replications(
    config: &DgpConfig,
    reps: usize,
    settings: &EstimatorSettings,
    tasks: &[Task],
) -> Result<ReplicationSummary> {
    if reps == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    if tasks.is_empty() {
        return Err(Error::Config("no tasks requested".into()));
    }
    config.validate()?;
    settings.solver.validate()?;
    let mut tasks = tasks.to_vec();
    tasks.sort_unstable();
    tasks.dedup();

    let outcomes: Vec<(usize, u64, Result<ReplicationRecord>)> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let seed = replication_seed(config.seed, i);
            (i, seed, run_one(config, seed, i, settings, &tasks))
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (index, seed, outcome) in outcomes {
        match outcome {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(ReplicationFailure { index, seed, message: e.to_string() }),
        }
    }
    Ok(summarize(config.clone(), settings.clone(), tasks, reps, records, failures))
}

fn run_one(
    config: &DgpConfig,
    seed: u64,
    index: usize,
    settings: &EstimatorSettings,
    tasks: &[Task],
) -> Result<ReplicationRecord> {
    let cfg = DgpConfig { seed, ..config.clone() };
    let truth = generate(&cfg)?;
    let centred = settings.center.then(|| demean(&truth.panel).0);
    let x = centred.as_ref().unwrap_or(&truth.panel).values();
    let (r, s) = (cfg.r, cfg.sparsity);
    let mut rec = ReplicationRecord {
        index,
        seed,
        factor_angle_error: None,
        factor_matrix_error: None,
        recovery_rate: None,
        r_hat: None,
        s_hat: None,
        loading_z: None,
        converged: None,
    };

    let needs_fit = tasks.iter().any(|t| matches!(t, Task::FactorError | Task::Recovery | Task::LoadingDistribution));
    if needs_fit {
        let fit = estimate_uncentred(x, &vec![s; r], &settings.solver)?;
        let f_hat = fit.factor_set.factors();
        rec.converged = Some(fit.factor_set.converged().iter().all(|&c| c));
        if tasks.contains(&Task::FactorError) {
            if r == 1 {
                rec.factor_angle_error = Some(factor_angle_error(f_hat.column(0), truth.factors.column(0))?);
            }
            rec.factor_matrix_error = Some(factor_matrix_error(f_hat, truth.factors.view())?);
        }
        if tasks.contains(&Task::Recovery) {
            rec.recovery_rate = Some(recovery_rate(fit.factor_set.supports(), &truth.supports, s)?);
        }
        if tasks.contains(&Task::LoadingDistribution) {
            // λ̂_i - Hλ_i with H = (F̂'F̂)^{-1} F̂'F, F centred when the panel is.
            let mut f_c = truth.factors.clone();
            if settings.center {
                let means = f_c.mean_axis(Axis(0)).expect("T >= 2");
                f_c -= &means;
            }
            let (inv, _) = design_inverse(f_hat)?;
            let h = inv.dot(&f_hat.t().dot(&f_c));
            let target = h.dot(&truth.loadings.row(0));
            let se = fit.loading_matrix.standard_errors.as_ref().expect("standard errors are always computed");
            rec.loading_z = Some((fit.loading_matrix.loadings[[0, 0]] - target[0]) / se[[0, 0]]);
        }
    }
    if tasks.contains(&Task::RSelection) {
        let k_max = settings.k_max.unwrap_or_else(|| default_k_max(cfg.t, cfg.n));
        let eigs = gram_spectrum(x);
        rec.r_hat = Some(select_num_factors_ratio(&eigs, k_max)?.selected);
    }
    if tasks.contains(&Task::SSelection) {
        let grid = settings.grid.clone().unwrap_or_else(|| default_grid(cfg.t));
        let splits = make_splits(cfg.n, settings.j_partitions, seed)?;
        let report = select_on_values(x, r, &grid, &splits, settings.penalty, &settings.solver)?;
        rec.s_hat = Some(report.selected);
    }
    Ok(rec)
}

fn summarize(
    config: DgpConfig,
    settings: EstimatorSettings,
    tasks: Vec<Task>,
    reps: usize,
    records: Vec<ReplicationRecord>,
    failures: Vec<ReplicationFailure>,
) -> ReplicationSummary {
    let collect = |f: fn(&ReplicationRecord) -> Option<f64>| records.iter().filter_map(f).collect::<Vec<_>>();
    let counts = |f: fn(&ReplicationRecord) -> Option<usize>| {
        let mut m = BTreeMap::new();
        for v in records.iter().filter_map(f) {
            *m.entry(v).or_insert(0) += 1;
        }
        m
    };
    let hit_rate = |m: &BTreeMap<usize, usize>, target: usize| {
        let total: usize = m.values().sum();
        (total > 0).then(|| *m.get(&target).unwrap_or(&0) as f64 / total as f64)
    };
    let z = collect(|r| r.loading_z);
    let r_hat_counts = counts(|r| r.r_hat);
    let s_hat_counts = counts(|r| r.s_hat);
    ReplicationSummary {
        factor_angle_error: Stat::of(&collect(|r| r.factor_angle_error)),
        factor_matrix_error: Stat::of(&collect(|r| r.factor_matrix_error)),
        recovery_rate: Stat::of(&collect(|r| r.recovery_rate)),
        r_correct_probability: hit_rate(&r_hat_counts, config.r),
        s_correct_probability: hit_rate(&s_hat_counts, config.sparsity),
        r_hat_counts,
        s_hat_counts,
        loading_z: Stat::of(&z),
        loading_ks: (!z.is_empty()).then(|| ks_standard_normal(&z).ok()).flatten(),
        completed: records.len(),
        config,
        settings,
        tasks,
        reps,
        failures,
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::dgp::NoiseKind;

    #[test]
    fn noise_free_factor_error_vanishes() {
        let mut cfg = DgpConfig::one_factor(20, 100, NoiseKind::IidGaussian, 4);
        cfg.noise_scale = 0.0;
        let sum =
            run_replications(&cfg, 4, &EstimatorSettings::default(), &[Task::FactorError, Task::Recovery]).unwrap();
        assert_eq!(sum.completed, 4);
        assert!(sum.factor_angle_error.unwrap().mean < 1e-6);
        assert_eq!(sum.recovery_rate.unwrap().mean, 1.0);
        assert!(sum.r_correct_probability.is_none());
    }

    #[test]
    fn summaries_are_reproducible() {
        let cfg = DgpConfig::three_factor(30, 80, NoiseKind::Ar1Diagonal, 9);
        let tasks = [Task::FactorError, Task::RSelection];
        let a = run_replications(&cfg, 3, &EstimatorSettings::default(), &tasks).unwrap();
        let b = run_replications(&cfg, 3, &EstimatorSettings::default(), &tasks).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![9, 8, 11]);
    }

    #[test]
    fn stat_values() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[7.0]).unwrap().sd, 0.0);
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn zero_reps_rejected() {
        let cfg = DgpConfig::one_factor(20, 100, NoiseKind::IidGaussian, 4);
        assert!(matches!(
            run_replications(&cfg, 0, &EstimatorSettings::default(), &[Task::Recovery]),
            Err(Error::Config(_))
        ));
    }
}
