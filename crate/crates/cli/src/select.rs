use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use sparse_apca::factor_model::default_k_max;
use sparse_apca::sparsity_selection::default_grid;
use sparse_apca::{demean, load_csv, select_num_factors_ic, select_num_factors_ratio, select_sparsity, PenaltyKind};

use crate::estimate::SolverArgs;
use crate::output::{self, Outputs};
use crate::parse;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum What {
    /// Number of factors.
    R,
    /// Sparsity level.
    S,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RMethod {
    /// Minimum ratio of consecutive gram eigenvalues.
    Ratio,
    /// Information criterion on dense principal-component fits.
    Ic,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub time_column: bool,
    #[arg(long, value_enum)]
    pub what: What,
    /// Method for `--what r`.
    #[arg(long, value_enum, default_value = "ratio")]
    pub method: RMethod,
    /// Upper bound K for `--what r`.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Number of factors for `--what s`; the ratio estimate when absent.
    #[arg(long)]
    pub r: Option<usize>,
    /// Candidate grid for `--what s`: `lo:hi`, a comma list, or `default`.
    #[arg(long, default_value = "default")]
    pub grid: String,
    #[arg(long, default_value_t = 10)]
    pub j: usize,
    #[arg(long, default_value = "ic_log_scaled")]
    pub penalty: PenaltyKind,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: SelectArgs) -> Result<()> {
    let started = output::now();
    let settings = args.solver.settings();
    settings.validate()?;
    let raw = load_csv(&args.input, args.time_column)?;
    let (panel, _) = demean(&raw);
    let (t, n) = (panel.t(), panel.n());
    let k_max = args.k_max.unwrap_or_else(|| default_k_max(t, n));
    let mut out = Outputs::default();

    match args.what {
        What::R => {
            let sel = match args.method {
                RMethod::Ratio => select_num_factors_ratio(&sparse_apca::panel::gram_spectrum(panel.values()), k_max)?,
                RMethod::Ic => select_num_factors_ic(&panel, k_max)?,
            };
            out.json(
                "selection.json",
                &json!({ "what": "r", "T": t, "N": n, "report": sel, "selected": sel.selected }),
            )?;
            out.csv(
                "selection.csv",
                &["k".to_string(), "criterion".to_string()],
                sel.criterion.iter().enumerate().map(|(k, v)| vec![(k + 1).to_string(), parse::fmt(*v)]),
            )?;
            eprintln!("selected r={}", sel.selected);
        }
        What::S => {
            let r = match args.r {
                Some(0) => bail!(sparse_apca::Error::Dimension("r must be at least 1".into())),
                Some(r) => r,
                None => select_num_factors_ratio(&sparse_apca::panel::gram_spectrum(panel.values()), k_max)?.selected,
            };
            let grid = parse::grid(&args.grid)?.unwrap_or_else(|| default_grid(t));
            let report = select_sparsity(&panel, r, &grid, args.j, args.penalty, &settings, args.solver.seed)?;
            out.json(
                "selection.json",
                &json!({ "what": "s", "T": t, "N": n, "report": report, "selected": report.selected }),
            )?;
            out.csv(
                "selection.csv",
                &["s", "raw_error", "penalty", "criterion"].map(String::from),
                (0..report.candidate_grid.len()).map(|i| {
                    vec![
                        report.candidate_grid[i].to_string(),
                        parse::fmt(report.raw_errors[i]),
                        parse::fmt(report.penalties[i]),
                        parse::fmt(report.criterion_values[i]),
                    ]
                }),
            )?;
            if report.boundary_hit {
                eprintln!("warning: selected s={} lies on the grid boundary", report.selected);
            }
            eprintln!("selected s={}", report.selected);
        }
    }
    let manifest = output::manifest("select", &args, args.solver.seed, started)?;
    out.json("manifest.json", &manifest)?;
    out.write_to(&args.out)?;
    Ok(())
}
