use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use sparse_apca::linalg::orthonormal_basis;
use sparse_apca::load_csv;
use sparse_apca::simulation::{factor_angle_error, factor_matrix_error, recovery_rate};
use sparse_apca::subspace_distances;

use crate::output::{self, Outputs};
use crate::parse;

#[derive(Args, Debug, Clone, Serialize)]
pub struct InspectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub time_column: bool,
    /// Also write summary.json and manifest.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: InspectArgs) -> Result<()> {
    let started = output::now();
    let panel = load_csv(&args.input, args.time_column)?;
    let summary = panel.summary();
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(dir) = &args.out {
        let mut out = Outputs::default();
        out.json("summary.json", &summary)?;
        out.json("manifest.json", &output::manifest("inspect", &args, 0, started)?)?;
        out.write_to(dir)?;
    }
    Ok(())
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Sine of the angle between the first columns.
    Angle,
    /// `|AA'/T - BB'/T|_F`.
    FactorError,
    /// Share of the nonzero positions of B also nonzero in A, column by column.
    Recovery,
    /// D, rho and |sin Θ|_F between the column spans.
    Subspace,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MetricArgs {
    #[arg(long, value_enum)]
    pub kind: MetricKind,
    /// Estimated factors (CSV with header, one column per factor).
    #[arg(long)]
    pub a: PathBuf,
    /// Reference factors, same layout.
    #[arg(long)]
    pub b: PathBuf,
}

pub fn run_metric(args: MetricArgs) -> Result<()> {
    let a = parse::matrix(&args.a)?;
    let b = parse::matrix(&args.b)?;
    if a.nrows() != b.nrows() {
        bail!(sparse_apca::Error::Dimension(format!("{} rows against {}", a.nrows(), b.nrows())));
    }
    let value = match args.kind {
        MetricKind::Angle => json!({ "d": factor_angle_error(a.column(0), b.column(0))? }),
        MetricKind::FactorError => json!({ "factor_matrix_error": factor_matrix_error(a.view(), b.view())? }),
        MetricKind::Recovery => {
            let support = |m: &ndarray::Array2<f64>| -> Vec<Vec<usize>> {
                m.columns().into_iter().map(|c| (0..c.len()).filter(|&i| c[i] != 0.0).collect()).collect()
            };
            let truth = support(&b);
            let s = truth.first().map(Vec::len).unwrap_or(0);
            json!({ "recovery_rate": recovery_rate(&support(&a), &truth, s)?, "s": s })
        }
        MetricKind::Subspace => {
            let d = subspace_distances(orthonormal_basis(a.view())?.view(), orthonormal_basis(b.view())?.view())?;
            json!({ "d": d.d, "rho": d.rho, "sin_theta": d.sin_theta })
        }
    };
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}
