use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;
use serde_json::json;

use sparse_apca::factor_model::{default_k_max, eigenvalue_ratios};
use sparse_apca::sparse_eigen::SolveTrace;
use sparse_apca::sparsity_selection::default_grid;
use sparse_apca::{demean, estimate, load_csv, select_num_factors_ratio, select_sparsity, PenaltyKind, SolverSettings};

use crate::output::{self, Outputs};
use crate::parse;

#[derive(Args, Debug, Clone, Serialize)]
pub struct SolverArgs {
    /// Convergence threshold on the sup-norm change between iterates.
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Seed for split sampling and fallback starts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SolverArgs {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            epsilon: self.epsilon,
            max_iterations: self.max_iter,
            seed: self.seed,
            ..SolverSettings::default()
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EstimateArgs {
    /// Panel CSV: header of series ids, one row per time point.
    #[arg(long)]
    pub input: PathBuf,
    /// First CSV column holds time labels.
    #[arg(long)]
    pub time_column: bool,
    /// Number of factors; chosen by the eigenvalue-ratio method when absent.
    #[arg(long)]
    pub r: Option<usize>,
    /// Use the eigenvalue-ratio estimate of r (the default without --r).
    #[arg(long, conflicts_with = "r")]
    pub select_r: bool,
    /// Upper bound K for the ratio method.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Sparsity per factor: one value for all factors or a comma list of r values.
    #[arg(long)]
    pub s: Option<String>,
    /// Choose s by cross-validation.
    #[arg(long, conflicts_with = "s")]
    pub select_s: bool,
    /// Candidate grid for --select-s: `lo:hi`, a comma list, or `default`.
    #[arg(long, default_value = "default")]
    pub grid: String,
    /// Number of random splits for --select-s.
    #[arg(long, default_value_t = 10)]
    pub j: usize,
    #[arg(long, default_value = "ic_log_scaled")]
    pub penalty: PenaltyKind,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write supports with 1-based indices.
    #[arg(long)]
    pub one_based: bool,
    /// Also write per-factor iteration traces.
    #[arg(long)]
    pub trace: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: EstimateArgs) -> Result<()> {
    let started = output::now();
    let settings = args.solver.settings();
    settings.validate()?;
    let raw = load_csv(&args.input, args.time_column)?;
    let (panel, _) = demean(&raw);
    let (t, n) = (panel.t(), panel.n());
    let eigs = sparse_apca::panel::gram_spectrum(panel.values());

    let k_max = args.k_max.unwrap_or_else(|| default_k_max(t, n));
    let r_selection = match args.r {
        Some(_) => None,
        None => Some(select_num_factors_ratio(&eigs, k_max)?),
    };
    let r = args.r.or(r_selection.as_ref().map(|s| s.selected)).expect("r is given or selected");
    if r == 0 {
        bail!(sparse_apca::Error::Dimension("r must be at least 1".into()));
    }

    let (sparsities, s_selection) = match (&args.s, args.select_s) {
        (Some(spec), _) => {
            let mut s = parse::list(spec)?;
            if s.len() == 1 {
                s = vec![s[0]; r];
            }
            if s.len() != r {
                bail!(sparse_apca::Error::Dimension(format!("{} sparsities given for r={r}", s.len())));
            }
            (s, None)
        }
        (None, true) => {
            let grid = parse::grid(&args.grid)?.unwrap_or_else(|| default_grid(t));
            let report = select_sparsity(&panel, r, &grid, args.j, args.penalty, &settings, args.solver.seed)?;
            (vec![report.selected; r], Some(report))
        }
        (None, false) => bail!("pass --s <value> or --select-s"),
    };

    let fit = estimate(&panel, r, &sparsities, &settings)?;
    let factors = fit.factor_set.factors();
    let lm = &fit.loading_matrix;
    let se = lm.standard_errors.as_ref().expect("standard errors are always computed");

    let mut out = Outputs::default();
    let labels: Vec<String> = match panel.time_labels() {
        Some(l) => l.to_vec(),
        None => (0..t).map(|i| i.to_string()).collect(),
    };
    let mut header = vec!["time".to_string()];
    header.extend((1..=r).map(|k| format!("f{k}")));
    out.csv(
        "factors.csv",
        &header,
        (0..t).map(|i| {
            let mut row = vec![labels[i].clone()];
            row.extend(factors.row(i).iter().map(|&v| parse::fmt(v)));
            row
        }),
    )?;

    let mut header = vec!["series".to_string()];
    header.extend((1..=r).map(|k| format!("lambda{k}")));
    header.extend((1..=r).map(|k| format!("se{k}")));
    out.csv(
        "loadings.csv",
        &header,
        (0..n).map(|i| {
            let mut row = vec![panel.series_ids()[i].clone()];
            row.extend(lm.loadings.row(i).iter().map(|&v| parse::fmt(v)));
            row.extend(se.row(i).iter().map(|&v| parse::fmt(v)));
            row
        }),
    )?;

    let offset = usize::from(args.one_based);
    let supports: Vec<Vec<usize>> =
        fit.factor_set.supports().iter().map(|s| s.iter().map(|&i| i + offset).collect()).collect();
    let support_labels: Vec<Vec<&str>> =
        fit.factor_set.supports().iter().map(|s| s.iter().map(|&i| labels[i].as_str()).collect()).collect();
    out.json(
        "supports.json",
        &json!({
            "index_base": offset,
            "sparsities": sparsities,
            "supports": supports,
            "time_labels": support_labels,
        }),
    )?;

    let ratios = eigenvalue_ratios(&eigs, k_max.min(eigs.len().saturating_sub(1)).max(1)).ok();
    out.json(
        "fit.json",
        &json!({
            "T": t,
            "N": n,
            "r": r,
            "sparsities": sparsities,
            "r_selection": r_selection,
            "s_selection": s_selection,
            "eigenvalue_ratios": ratios,
            "gram_eigenvalues": eigs.iter().take(20).collect::<Vec<_>>(),
            "explained_variance_ratio": fit.explained_variance_ratio(&panel),
            "converged": fit.factor_set.converged(),
            "iterations": fit.solver_outcomes.iter().map(|o| o.iterations).collect::<Vec<_>>(),
            "restarts": fit.solver_outcomes.iter().map(|o| o.restarts).collect::<Vec<_>>(),
            "noise_variance_mean": lm.noise_variances.as_ref().map(|v| v.mean()),
            "solver": settings,
        }),
    )?;
    if args.trace {
        let traces: Vec<SolveTrace> = fit.solver_outcomes.iter().map(|o| o.trace()).collect();
        out.json("trace.json", &traces)?;
    }
    let manifest = output::manifest("estimate", &args, args.solver.seed, started)?;
    out.json("manifest.json", &manifest)?;
    out.write_to(&args.out)?;
    eprintln!("estimated r={r}, s={sparsities:?}; results in {}", args.out.display());
    Ok(())
}
