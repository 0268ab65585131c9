use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use sparse_apca::simulation::{
    default_sparsity, run_replications, run_table, DgpConfig, EstimatorSettings, NoiseKind, SparsityRule, Task,
};
use sparse_apca::PenaltyKind;

use crate::estimate::SolverArgs;
use crate::output::{self, Outputs};
use crate::parse;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseChoice {
    Iid,
    Ar,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleChoice {
    Random,
    Top,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskChoice {
    FactorError,
    Recovery,
    RSelection,
    SSelection,
    LoadingDistribution,
}

impl From<TaskChoice> for Task {
    fn from(t: TaskChoice) -> Self {
        match t {
            TaskChoice::FactorError => Task::FactorError,
            TaskChoice::Recovery => Task::Recovery,
            TaskChoice::RSelection => Task::RSelection,
            TaskChoice::SSelection => Task::SSelection,
            TaskChoice::LoadingDistribution => Task::LoadingDistribution,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    /// Table design 1-6; omit to describe a DGP with --n, --t and --r.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    pub table: Option<u8>,
    /// Cells of the table to run, e.g. `N=50:T=200,N=100:T=200`; all cells when absent.
    #[arg(long)]
    pub cells: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    /// Nonzeros per factor (default ceil(sqrt(T))).
    #[arg(long)]
    pub sparsity: Option<usize>,
    #[arg(long, value_enum, default_value = "random")]
    pub sparsity_rule: RuleChoice,
    /// Noise innovation standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    /// Noise design; tables default to both, custom DGPs to iid.
    #[arg(long, value_enum)]
    pub noise: Option<NoiseChoice>,
    /// Tasks for a custom DGP.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "factor-error,recovery")]
    pub tasks: Vec<TaskChoice>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Demean each simulated panel before estimation.
    #[arg(long)]
    pub center: bool,
    /// Splits for the sparsity-selection task.
    #[arg(long, default_value_t = 1)]
    pub j: usize,
    #[arg(long, default_value = "ic_log_scaled")]
    pub penalty: PenaltyKind,
    /// Sparsity grid for the selection task: `lo:hi`, a comma list, or `default`.
    #[arg(long, default_value = "default")]
    pub grid: String,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn noises(choice: NoiseChoice) -> Vec<NoiseKind> {
    match choice {
        NoiseChoice::Iid => vec![NoiseKind::IidGaussian],
        NoiseChoice::Ar => vec![NoiseKind::Ar1Diagonal],
        NoiseChoice::Both => vec![NoiseKind::IidGaussian, NoiseKind::Ar1Diagonal],
    }
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let started = output::now();
    let solver = args.solver.settings();
    solver.validate()?;
    let settings = EstimatorSettings {
        solver,
        j_partitions: args.j,
        penalty: args.penalty,
        grid: parse::grid(&args.grid)?,
        k_max: None,
        center: args.center,
    };
    let seed = args.solver.seed;
    let mut out = Outputs::default();

    match args.table {
        Some(id) => {
            if args.n.is_some() || args.t.is_some() {
                bail!("--n/--t describe a custom DGP and cannot be combined with --table");
            }
            let cells = args.cells.as_deref().map(parse::cells).transpose()?;
            let noise = noises(args.noise.unwrap_or(NoiseChoice::Both));
            let run = run_table(id, cells.as_deref(), &noise, args.reps, seed, Some(&settings))?;
            out.add("table.csv", run.to_csv()?.into_bytes());
            out.json("summary.json", &run)?;
            for c in &run.cells {
                eprintln!(
                    "table {id} N={} T={} {}: {} (reference {})",
                    c.n,
                    c.t,
                    sparse_apca::simulation::tables::noise_label(c.noise),
                    c.value.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into()),
                    c.reference.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into()),
                );
            }
        }
        None => {
            let (Some(n), Some(t)) = (args.n, args.t) else {
                bail!("pass --table, or --n and --t for a custom DGP");
            };
            let noise = match args.noise.unwrap_or(NoiseChoice::Iid) {
                NoiseChoice::Iid => NoiseKind::IidGaussian,
                NoiseChoice::Ar => NoiseKind::Ar1Diagonal,
                NoiseChoice::Both => bail!("--noise both is only available with --table"),
            };
            let mut cfg = custom_config(n, t, args.r, noise, seed);
            cfg.sparsity = args.sparsity.unwrap_or(default_sparsity(t));
            cfg.noise_scale = args.noise_scale;
            cfg.sparsity_rule = match args.sparsity_rule {
                RuleChoice::Random => SparsityRule::RandomSupport,
                RuleChoice::Top => SparsityRule::TopMagnitude,
            };
            let tasks: Vec<Task> = args.tasks.iter().map(|&t| t.into()).collect();
            let summary = run_replications(&cfg, args.reps, &settings, &tasks)?;
            out.json("summary.json", &summary)?;
            let header = [
                "index",
                "seed",
                "factor_angle_error",
                "factor_matrix_error",
                "recovery_rate",
                "r_hat",
                "s_hat",
                "loading_z",
            ]
            .map(String::from);
            let opt_f = |v: Option<f64>| v.map(parse::fmt).unwrap_or_default();
            let opt_u = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
            out.csv(
                "records.csv",
                &header,
                summary.records.iter().map(|r| {
                    vec![
                        r.index.to_string(),
                        r.seed.to_string(),
                        opt_f(r.factor_angle_error),
                        opt_f(r.factor_matrix_error),
                        opt_f(r.recovery_rate),
                        opt_u(r.r_hat),
                        opt_u(r.s_hat),
                        opt_f(r.loading_z),
                    ]
                }),
            )?;
            eprintln!("{} of {} replications completed", summary.completed, summary.reps);
        }
    }
    let manifest = output::manifest("simulate", &args, seed, started)?;
    out.json("manifest.json", &manifest)?;
    out.write_to(&args.out)?;
    Ok(())
}

/// One-factor design for `r = 1`, otherwise the multi-factor design with AR
/// coefficients cycling through (0.5, -0.6, 0.7) and strengths `r, r-1, ..., 1`.
fn custom_config(n: usize, t: usize, r: usize, noise: NoiseKind, seed: u64) -> DgpConfig {
    if r == 1 {
        return DgpConfig::one_factor(n, t, noise, seed);
    }
    let mut cfg = DgpConfig::three_factor(n, t, noise, seed);
    cfg.r = r;
    cfg.factor_ar = [0.5, -0.6, 0.7].iter().cycle().take(r).copied().collect();
    cfg.loading_strengths = (1..=r).rev().map(|k| k as f64).collect();
    cfg
}
