//! Flag value parsers and small file readers.

use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::Array2;

/// `lo:hi` (inclusive), a comma list, or `default`. `None` means default.
pub fn grid(spec: &str) -> Result<Option<Vec<usize>>> {
    let spec = spec.trim();
    if spec.is_empty() || spec == "default" {
        return Ok(None);
    }
    if let Some((lo, hi)) = spec.split_once(':') {
        let lo: usize = lo.trim().parse().with_context(|| format!("bad grid start in {spec:?}"))?;
        let hi: usize = hi.trim().parse().with_context(|| format!("bad grid end in {spec:?}"))?;
        if lo == 0 || hi < lo {
            bail!("grid {spec:?} must satisfy 1 <= lo <= hi");
        }
        return Ok(Some((lo..=hi).collect()));
    }
    list(spec).map(Some)
}

pub fn list(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad integer {p:?} in {spec:?}")))
        .collect()
}

/// `N=50:T=200,N=100:T=500`.
pub fn cells(spec: &str) -> Result<Vec<(usize, usize)>> {
    spec.split(',')
        .map(|cell| {
            let mut n = None;
            let mut t = None;
            for part in cell.split(':') {
                match part.trim().split_once('=') {
                    Some(("N" | "n", v)) => n = Some(v.parse::<usize>()?),
                    Some(("T" | "t", v)) => t = Some(v.parse::<usize>()?),
                    _ => bail!("bad cell {cell:?}; expected N=<n>:T=<t>"),
                }
            }
            match (n, t) {
                (Some(n), Some(t)) => Ok((n, t)),
                _ => bail!("cell {cell:?} needs both N and T"),
            }
        })
        .collect()
}

/// Numeric CSV with a header row.
pub fn matrix(path: &Path) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| sparse_apca::Error::Io { path: path.to_path_buf(), source: std::io::Error::other(e) })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, c)| {
                c.parse::<f64>().map_err(|_| sparse_apca::Error::Parse {
                    line: i as u64 + 2,
                    column: Some(j + 1),
                    message: format!("not a number: {c:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || ncols == 0 {
        return Err(sparse_apca::Error::Dimension(format!("{} has no data", path.display())).into());
    }
    let flat: Vec<f64> = rows.concat();
    Ok(Array2::from_shape_vec((rows.len(), ncols), flat)?)
}

/// Shortest round-trip scientific notation; negative zero prints as `0e0`.
pub fn fmt(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(grid("3:6").unwrap(), Some(vec![3, 4, 5, 6]));
        assert_eq!(grid("5, 9,12").unwrap(), Some(vec![5, 9, 12]));
        assert_eq!(grid("default").unwrap(), None);
        assert!(grid("0:4").is_err());
        assert!(grid("7:3").is_err());
        assert!(grid("a,b").is_err());
    }

    #[test]
    fn cell_lists() {
        assert_eq!(cells("N=50:T=200").unwrap(), vec![(50, 200)]);
        assert_eq!(cells("N=50:T=200,T=500:N=100").unwrap(), vec![(50, 200), (100, 500)]);
        assert!(cells("N=50").is_err());
        assert!(cells("50x200").is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -3.25e-17, 1.0 / 3.0, 12345.678] {
            assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
        }
    }
}
