//! Panel ingestion, centring and the scaled gram matrix `S = XX'/(NT)`.

use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// A balanced `T×N` panel: rows are time points, columns are series.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    values: Array2<f64>,
    series_ids: Vec<String>,
    time_labels: Option<Vec<String>>,
    centered: bool,
}

/// Returned by [`demean`] when the input was already centred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdempotencyWarning;

impl std::fmt::Display for IdempotencyWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("panel is already centred; returned unchanged")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelSummary {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub centered: bool,
    pub column_means_max_abs: f64,
}

impl Panel {
    /// Builds an uncentred panel, validating shape, finiteness and ids.
    pub fn new(values: Array2<f64>, series_ids: Vec<String>, time_labels: Option<Vec<String>>) -> Result<Self> {
        let (t, n) = values.dim();
        if t < 2 || n < 2 {
            return Err(Error::Dimension(format!("panel must be at least 2x2, got {t}x{n}")));
        }
        if series_ids.len() != n {
            return Err(Error::Dimension(format!("{} series ids for {n} columns", series_ids.len())));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &series_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Precondition(format!("duplicate series id {id:?}")));
            }
        }
        if let Some(labels) = &time_labels {
            if labels.len() != t {
                return Err(Error::Dimension(format!("{} time labels for {t} rows", labels.len())));
            }
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Precondition(format!("non-finite value at row {row}, column {col}")));
        }
        Ok(Self { values, series_ids, time_labels, centered: false })
    }

    /// Panel with generated ids `s0, s1, ...`.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let ids = (0..values.ncols()).map(|i| format!("s{i}")).collect();
        Self::new(values, ids, None)
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn time_labels(&self) -> Option<&[String]> {
        self.time_labels.as_deref()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Number of time points `T`.
    pub fn t(&self) -> usize {
        self.values.nrows()
    }

    /// Number of series `N`.
    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_means(&self) -> Array1<f64> {
        self.values.mean_axis(Axis(0)).expect("panel has rows")
    }

    pub fn summary(&self) -> PanelSummary {
        PanelSummary {
            t: self.t(),
            n: self.n(),
            centered: self.centered,
            column_means_max_abs: self.column_means().iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Sub-panel made of the listed columns, keeping the centring flag.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.n()) {
            return Err(Error::Dimension(format!("column {bad} out of range for N={}", self.n())));
        }
        let values = self.values.select(Axis(1), columns);
        let ids = columns.iter().map(|&c| self.series_ids[c].clone()).collect();
        let mut sub = Self::new(values, ids, self.time_labels.clone())?;
        sub.centered = self.centered;
        Ok(sub)
    }

    /// Multiplies every observation by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut out = Self::new(&self.values * c, self.series_ids.clone(), self.time_labels.clone())?;
        out.centered = self.centered;
        Ok(out)
    }
}

/// Reads a comma-separated panel. The first row holds series ids; when
/// `has_time_column` is set the first column holds time labels.
pub fn load_csv(path: impl AsRef<Path>, has_time_column: bool) -> Result<Panel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_csv(file, has_time_column)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, has_time_column: bool) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(&e))?,
        None => return Err(Error::Dimension("empty file".into())),
    };
    let skip = usize::from(has_time_column);
    let series_ids: Vec<String> = header.iter().skip(skip).map(str::to_owned).collect();
    let width = header.len();

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0usize;
    for rec in records {
        let rec = rec.map_err(|e| csv_error(&e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                column: None,
                message: format!("expected {width} cells, found {}", rec.len()),
            });
        }
        for (col, cell) in rec.iter().enumerate() {
            if col < skip {
                labels.push(cell.to_owned());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                column: Some(col + 1),
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: Some(col + 1),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            data.push(v);
        }
        rows += 1;
    }

    let n = series_ids.len();
    if rows < 2 || n < 2 {
        return Err(Error::Dimension(format!("panel must be at least 2x2, got {rows}x{n}")));
    }
    let values = Array2::from_shape_vec((rows, n), data).map_err(|e| Error::Dimension(e.to_string()))?;
    Panel::new(values, series_ids, has_time_column.then_some(labels))
}

fn csv_error(e: &csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse { line, column: None, message: e.to_string() }
}

/// Subtracts each series' time mean. An already-centred panel comes back
/// unchanged together with an [`IdempotencyWarning`].
pub fn demean(panel: &Panel) -> (Panel, Option<IdempotencyWarning>) {
    if panel.centered {
        return (panel.clone(), Some(IdempotencyWarning));
    }
    let means = panel.column_means();
    let mut values = &panel.values - &means.insert_axis(Axis(0));
    // A second pass removes the rounding residue left by the first.
    let residue = values.mean_axis(Axis(0)).expect("panel has rows");
    values -= &residue.insert_axis(Axis(0));
    let out =
        Panel { values, series_ids: panel.series_ids.clone(), time_labels: panel.time_labels.clone(), centered: true };
    (out, None)
}

/// Symmetric PSD `T×T` matrix `XX'/(NT)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: Array2<f64>,
    scale_n: usize,
    scale_t: usize,
}

impl GramMatrix {
    /// Wraps an arbitrary symmetric matrix, e.g. for solver experiments.
    /// `scale_n`/`scale_t` are recorded as given.
    pub fn from_symmetric(values: Array2<f64>, scale_n: usize, scale_t: usize) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::Dimension(format!("gram must be square, got {:?}", values.dim())));
        }
        if linalg::relative_asymmetry(values.view()) > 1e-12 {
            return Err(Error::Precondition("gram matrix is not symmetric".into()));
        }
        Ok(Self { values, scale_n, scale_t })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn scale_n(&self) -> usize {
        self.scale_n
    }

    pub fn scale_t(&self) -> usize {
        self.scale_t
    }
}

/// `S = XX'/(NT)` of a centred panel.
pub fn scaled_gram(panel: &Panel) -> Result<GramMatrix> {
    if !panel.centered {
        return Err(Error::Precondition("scaled_gram requires a centred panel".into()));
    }
    Ok(gram_of(panel.values.view()))
}

pub(crate) fn gram_of(x: ArrayView2<'_, f64>) -> GramMatrix {
    let (t, n) = x.dim();
    let mut s = x.dot(&x.t());
    s /= (n * t) as f64;
    symmetrize(&mut s);
    GramMatrix { values: s, scale_n: n, scale_t: t }
}

/// Copies the upper triangle onto the lower one.
pub(crate) fn symmetrize(s: &mut Array2<f64>) {
    let n = s.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            s[[j, i]] = s[[i, j]];
        }
    }
}

/// The `T` eigenvalues of `XX'`, descending. Computed from the smaller of
/// `XX'` and `X'X`; the missing ones are exact zeros.
pub fn gram_spectrum(x: ArrayView2<'_, f64>) -> Vec<f64> {
    let (t, n) = x.dim();
    let mut vals = if n < t {
        let mut g = x.t().dot(&x);
        symmetrize(&mut g);
        linalg::symmetric_eigenvalues(g.view())
    } else {
        let mut g = x.dot(&x.t());
        symmetrize(&mut g);
        linalg::symmetric_eigenvalues(g.view())
    };
    vals.resize(t, 0.0);
    vals
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn panel(values: Array2<f64>) -> Panel {
        Panel::from_values(values).unwrap()
    }

    #[test]
    fn read_back_small_csv() {
        let p = read_csv("a,b\n1,2\n3,4\n5,6\n".as_bytes(), false).unwrap();
        assert_eq!((p.t(), p.n()), (3, 2));
        assert_eq!(p.series_ids(), ["a", "b"]);
        assert_eq!(p.values(), array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert!(!p.is_centered());
    }

    #[test]
    fn time_column_and_scientific_notation() {
        let p = read_csv("date,x,y\n2020-01-01,1e-3,2\n2020-01-02,-4.5E2,0\n".as_bytes(), true).unwrap();
        assert_eq!(p.time_labels().unwrap(), ["2020-01-01", "2020-01-02"]);
        assert_eq!(p.values()[[1, 0]], -450.0);
    }

    #[test]
    fn ragged_row_reports_line() {
        match read_csv("a,b\n1,2\n3,4,5\n5,6\n".as_bytes(), false) {
            Err(Error::Parse { line, column: None, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_reports_coordinates() {
        match read_csv("a,b\n1,2\n3,x\n".as_bytes(), false) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, Some(2))),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_csv("a,b\n1,2\n3,NaN\n".as_bytes(), false), Err(Error::Parse { .. })));
    }

    #[test]
    fn too_small_is_dimension_error() {
        assert!(matches!(read_csv("a,b\n1,2\n".as_bytes(), false), Err(Error::Dimension(_))));
        assert!(matches!(read_csv("a\n1\n2\n".as_bytes(), false), Err(Error::Dimension(_))));
        assert!(matches!(read_csv("".as_bytes(), false), Err(Error::Dimension(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(Panel::new(Array2::zeros((3, 2)), vec!["a".into(), "a".into()], None).is_err());
    }

    #[test]
    fn demean_examples() {
        let (p, w) = demean(&panel(array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]));
        assert!(w.is_none());
        assert_eq!(p.values().column(0).to_vec(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(p.values().column(1).to_vec(), vec![0.0, 0.0, 0.0]);
        assert!(p.is_centered());

        let (p, _) = demean(&panel(array![[1.0, 10.0], [3.0, 30.0]]));
        assert_eq!(p.values(), array![[-1.0, -10.0], [1.0, 10.0]]);
    }

    #[test]
    fn demean_twice_warns_and_is_identity() {
        let (once, _) = demean(&panel(array![[1.0, 2.0], [3.0, 7.0], [4.0, 1.0]]));
        let (twice, warning) = demean(&once);
        assert_eq!(warning, Some(IdempotencyWarning));
        assert_eq!(once, twice);
    }

    #[test]
    fn gram_examples() {
        let mut p = Panel::new(array![[1.0, 0.0], [-1.0, 0.0]], vec!["a".into(), "b".into()], None).unwrap();
        assert!(matches!(scaled_gram(&p), Err(Error::Precondition(_))));
        p = demean(&p).0;
        // N=2 here, so twice the single-series value.
        let s = scaled_gram(&p).unwrap();
        assert_eq!(s.values(), array![[0.25, -0.25], [-0.25, 0.25]]);

        let zero = demean(&panel(Array2::zeros((3, 2)))).0;
        assert!(scaled_gram(&zero).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_series_gram_hand_value() {
        // X = [1, -1]' with N=1, T=2 gives [[0.5,-0.5],[-0.5,0.5]].
        let s = gram_of(array![[1.0], [-1.0]].view());
        assert_eq!(s.values(), array![[0.5, -0.5], [-0.5, 0.5]]);
        assert_eq!((s.scale_n(), s.scale_t()), (1, 2));
    }

    #[test]
    fn gram_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Array2::from_shape_fn((6, 4), |_| rng.random_range(-1.0..1.0));
        let p = demean(&panel(x)).0;
        let s = scaled_gram(&p).unwrap();
        let xv = p.values();
        for t in 0..6 {
            for u in 0..6 {
                let mut acc = 0.0;
                for i in 0..4 {
                    acc += xv[[t, i]] * xv[[u, i]];
                }
                assert!((acc / 24.0 - s.values()[[t, u]]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn spectrum_from_either_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let wide = Array2::from_shape_fn((5, 9), |_| rng.random_range(-1.0..1.0));
        let tall = Array2::from_shape_fn((9, 5), |_| rng.random_range(-1.0..1.0));
        for x in [wide, tall] {
            let fast = gram_spectrum(x.view());
            let direct = linalg::symmetric_eigenvalues(x.dot(&x.t()).view());
            assert_eq!(fast.len(), x.nrows());
            for (a, b) in fast.iter().zip(&direct) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn summary_json_shape() {
        let p = demean(&panel(array![[1.0, 2.0], [3.0, 4.0]])).0;
        let s = p.summary();
        assert_eq!((s.t, s.n, s.centered), (2, 2, true));
        assert!(s.column_means_max_abs < 1e-15);
    }
}
