//! The six Monte Carlo table designs and their table-shaped CSV output.

use serde::Serialize;

use super::dgp::{DgpConfig, NoiseKind, SparsityRule};
use super::replication::{run_replications, EstimatorSettings, ReplicationSummary, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableMetric {
    /// Mean angle error `d`.
    FactorAngleError,
    /// Mean support recovery rate.
    RecoveryRate,
    /// Mean `|F̂F̂'/T - FF'/T|_F`.
    FactorMatrixError,
    /// Empirical `P(r̂ = r)`.
    RCorrect,
    /// Empirical `P(ŝ = s)`.
    SCorrect,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableDesign {
    pub id: u8,
    pub metric: TableMetric,
    pub r: usize,
    pub ns: Vec<usize>,
    pub ts: Vec<usize>,
    /// Published values, rows = N, columns = T, for iid and AR noise.
    pub reference_iid: Vec<Vec<f64>>,
    pub reference_ar: Vec<Vec<f64>>,
}

impl TableDesign {
    pub fn get(id: u8) -> Result<Self> {
        let one_n = vec![50, 100, 150, 300, 500];
        let one_t = vec![200, 500, 800, 1000, 1200];
        let three_n = vec![50, 100, 150, 200, 300];
        let three_t = vec![100, 200, 300, 500, 800];
        let ones = vec![vec![1.0; 5]; 5];
        let (metric, r, ns, ts, reference_iid, reference_ar) = match id {
            1 => (
                TableMetric::FactorAngleError,
                1,
                one_n,
                one_t,
                rows(&[
                    [0.050, 0.040, 0.036, 0.034, 0.032],
                    [0.033, 0.027, 0.024, 0.022, 0.021],
                    [0.026, 0.021, 0.018, 0.017, 0.016],
                    [0.018, 0.014, 0.013, 0.012, 0.011],
                    [0.014, 0.011, 0.009, 0.009, 0.008],
                ]),
                rows(&[
                    [0.087, 0.069, 0.054, 0.051, 0.055],
                    [0.055, 0.041, 0.040, 0.036, 0.035],
                    [0.044, 0.035, 0.031, 0.030, 0.028],
                    [0.029, 0.023, 0.020, 0.019, 0.018],
                    [0.022, 0.017, 0.015, 0.014, 0.013],
                ]),
            ),
            2 => (
                TableMetric::RecoveryRate,
                1,
                one_n,
                one_t,
                rows(&[
                    [0.918, 0.933, 0.936, 0.938, 0.940],
                    [0.940, 0.950, 0.954, 0.956, 0.957],
                    [0.952, 0.959, 0.962, 0.963, 0.965],
                    [0.969, 0.971, 0.971, 0.974, 0.973],
                    [0.971, 0.978, 0.979, 0.980, 0.980],
                ]),
                rows(&[
                    [0.884, 0.900, 0.914, 0.916, 0.910],
                    [0.916, 0.930, 0.930, 0.935, 0.937],
                    [0.931, 0.939, 0.943, 0.945, 0.947],
                    [0.951, 0.956, 0.958, 0.962, 0.961],
                    [0.957, 0.965, 0.969, 0.970, 0.971],
                ]),
            ),
            3 => (
                TableMetric::FactorMatrixError,
                3,
                three_n,
                three_t,
                rows(&[
                    [0.090, 0.080, 0.073, 0.065, 0.058],
                    [0.059, 0.054, 0.049, 0.043, 0.039],
                    [0.047, 0.043, 0.039, 0.033, 0.031],
                    [0.041, 0.036, 0.032, 0.029, 0.026],
                    [0.032, 0.029, 0.026, 0.023, 0.020],
                ]),
                rows(&[
                    [0.136, 0.127, 0.116, 0.114, 0.100],
                    [0.099, 0.090, 0.075, 0.068, 0.063],
                    [0.078, 0.071, 0.063, 0.056, 0.050],
                    [0.068, 0.061, 0.055, 0.049, 0.043],
                    [0.052, 0.045, 0.043, 0.037, 0.032],
                ]),
            ),
            4 => (
                TableMetric::RecoveryRate,
                3,
                three_n,
                three_t,
                rows(&[
                    [0.949, 0.950, 0.953, 0.957, 0.960],
                    [0.966, 0.965, 0.965, 0.969, 0.971],
                    [0.971, 0.971, 0.973, 0.977, 0.976],
                    [0.973, 0.974, 0.977, 0.977, 0.980],
                    [0.980, 0.979, 0.981, 0.983, 0.983],
                ]),
                rows(&[
                    [0.931, 0.931, 0.932, 0.934, 0.940],
                    [0.947, 0.948, 0.952, 0.955, 0.958],
                    [0.956, 0.957, 0.960, 0.964, 0.965],
                    [0.959, 0.959, 0.964, 0.966, 0.970],
                    [0.968, 0.971, 0.971, 0.973, 0.975],
                ]),
            ),
            5 => {
                let mut ar = ones.clone();
                ar[1][0] = 0.998;
                ar[2][0] = 0.998;
                (TableMetric::RCorrect, 3, three_n, three_t, ones, ar)
            }
            6 => {
                let mut ar = ones.clone();
                ar[0][0] = 0.882;
                ar[0][1] = 0.980;
                ar[1][0] = 0.998;
                (TableMetric::SCorrect, 1, three_n, three_t, ones, ar)
            }
            other => return Err(Error::Config(format!("no table {other}; tables are 1-6"))),
        };
        Ok(Self { id, metric, r, ns, ts, reference_iid, reference_ar })
    }

    /// DGP for one cell of the table.
    pub fn config(&self, n: usize, t: usize, noise: NoiseKind, seed: u64) -> DgpConfig {
        let mut cfg = if self.r == 1 {
            DgpConfig::one_factor(n, t, noise, seed)
        } else {
            DgpConfig::three_factor(n, t, noise, seed)
        };
        if self.id == 6 {
            cfg.sparsity_rule = SparsityRule::TopMagnitude;
        }
        cfg
    }

    pub fn task(&self) -> Task {
        match self.metric {
            TableMetric::FactorAngleError | TableMetric::FactorMatrixError => Task::FactorError,
            TableMetric::RecoveryRate => Task::Recovery,
            TableMetric::RCorrect => Task::RSelection,
            TableMetric::SCorrect => Task::SSelection,
        }
    }

    /// Estimator settings used for the table: one split and the scaled log
    /// criterion for the sparsity table, defaults elsewhere.
    pub fn settings(&self) -> EstimatorSettings {
        EstimatorSettings::default()
    }

    pub fn reference(&self, n: usize, t: usize, noise: NoiseKind) -> Option<f64> {
        let i = self.ns.iter().position(|&v| v == n)?;
        let j = self.ts.iter().position(|&v| v == t)?;
        Some(match noise {
            NoiseKind::IidGaussian => self.reference_iid[i][j],
            NoiseKind::Ar1Diagonal => self.reference_ar[i][j],
        })
    }

    /// The table's headline value from a summary.
    pub fn value(&self, summary: &ReplicationSummary) -> Option<f64> {
        match self.metric {
            TableMetric::FactorAngleError => summary.factor_angle_error.map(|s| s.mean),
            TableMetric::FactorMatrixError => summary.factor_matrix_error.map(|s| s.mean),
            TableMetric::RecoveryRate => summary.recovery_rate.map(|s| s.mean),
            TableMetric::RCorrect => summary.r_correct_probability,
            TableMetric::SCorrect => summary.s_correct_probability,
        }
    }
}

fn rows(values: &[[f64; 5]]) -> Vec<Vec<f64>> {
    values.iter().map(|r| r.to_vec()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCell {
    pub n: usize,
    pub t: usize,
    pub noise: NoiseKind,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub summary: ReplicationSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRun {
    pub design: TableDesign,
    pub reps: usize,
    pub seed: u64,
    pub cells: Vec<TableCell>,
}

/// Runs the requested `(N, T)` cells of a table (all cells when `cells` is
/// `None`) under each noise kind in `noises`. Every cell uses the same base seed.
pub fn run_table(
    id: u8,
    cells: Option<&[(usize, usize)]>,
    noises: &[NoiseKind],
    reps: usize,
    seed: u64,
    settings: Option<&EstimatorSettings>,
) -> Result<TableRun> {
    let design = TableDesign::get(id)?;
    let grid: Vec<(usize, usize)> = match cells {
        Some(c) => c.to_vec(),
        None => design.ns.iter().flat_map(|&n| design.ts.iter().map(move |&t| (n, t))).collect(),
    };
    let settings = settings.cloned().unwrap_or_else(|| design.settings());
    let mut out = Vec::new();
    for &noise in noises {
        for &(n, t) in &grid {
            let cfg = design.config(n, t, noise, seed);
            let summary = run_replications(&cfg, reps, &settings, &[design.task()])?;
            out.push(TableCell {
                n,
                t,
                noise,
                value: design.value(&summary),
                reference: design.reference(n, t, noise),
                summary,
            });
        }
    }
    Ok(TableRun { design, reps, seed, cells: out })
}

impl TableRun {
    /// Table-shaped CSV: one row per `(noise, N)`, one column per `T`. Cells
    /// that were not run are left empty.
    pub fn to_csv(&self) -> Result<String> {
        let mut ts: Vec<usize> = self.cells.iter().map(|c| c.t).collect();
        ts.sort_unstable();
        ts.dedup();
        let mut keys: Vec<(NoiseKind, usize)> = Vec::new();
        for c in &self.cells {
            if !keys.contains(&(c.noise, c.n)) {
                keys.push((c.noise, c.n));
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["noise".to_string(), "N".to_string()];
        header.extend(ts.iter().map(|t| format!("T={t}")));
        w.write_record(&header).map_err(csv_error)?;
        for (noise, n) in keys {
            let mut row = vec![noise_label(noise).to_string(), n.to_string()];
            for &t in &ts {
                let cell = self.cells.iter().find(|c| c.noise == noise && c.n == n && c.t == t);
                row.push(cell.and_then(|c| c.value).map(|v| format!("{v:.3}")).unwrap_or_default());
            }
            w.write_record(&row).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn noise_label(noise: NoiseKind) -> &'static str {
    match noise {
        NoiseKind::IidGaussian => "iid_gaussian",
        NoiseKind::Ar1Diagonal => "ar1_diagonal",
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Numerical(format!("csv write failed: {e}"))
}
