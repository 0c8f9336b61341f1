//! Fast cellwise outlier detection.
//!
//! Columns are wrapped and standardized. Because standardized columns satisfy
//! `Cor(x, y) = 1 − ‖x − y‖² / (2(n − 1))`, a column's most correlated peers
//! (of either sign) are its nearest neighbors among all columns and their
//! negations. Each cell is predicted from those peers, and cells whose
//! standardized residual is too large are flagged.

use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{fmt_full, write_records, DataMatrix};
use crate::error::{Error, Result};
use crate::knn::{build_index, Backend, PointSet};
use crate::linalg;
use crate::ppm::{self, Image};
use crate::psi::PsiSpec;
use crate::scalar::Scalar;
use crate::special::chi_cutoff;
use crate::univariate::{self, ColumnModel};

/// Tolerance on the mean and standard deviation of standardized columns.
pub const STANDARDIZED_TOL: f64 = 1e-8;

/// Share of squared singular mass kept by [`ReducedDim::Auto`].
pub const AUTO_MASS: f64 = 0.999;

/// Dimension of the space in which neighbors are searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReducedDim {
    /// Smallest `q` capturing [`AUTO_MASS`] of the squared singular values.
    Auto,
    /// No projection.
    Full,
    Fixed(usize),
}

impl FromStr for ReducedDim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ReducedDim::Auto),
            "full" | "n" => Ok(ReducedDim::Full),
            other => other.parse().map(ReducedDim::Fixed).map_err(|_| {
                Error::Config(format!(
                    "q must be 'auto', 'full' or a count, got '{}'",
                    other
                ))
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DdcOptions {
    pub k: usize,
    pub q: ReducedDim,
    pub min_cor: f64,
    pub p: f64,
    pub backend: Backend,
    /// A row is flagged when more than this share of its observed cells is.
    pub row_fraction: f64,
    pub spec: PsiSpec,
}

impl Default for DdcOptions {
    fn default() -> Self {
        Self {
            k: 10,
            q: ReducedDim::Auto,
            min_cor: 0.5,
            p: 0.99,
            backend: Backend::Exact,
            row_fraction: 0.25,
            spec: PsiSpec::default_wrapping(),
        }
    }
}

impl DdcOptions {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.min_cor) {
            return Err(Error::Config(format!(
                "min_cor must lie in [0, 1], got {}",
                self.min_cor
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!(
                "quantile p must lie in (0, 1), got {}",
                self.p
            )));
        }
        if !(0.0..=1.0).contains(&self.row_fraction) {
            return Err(Error::Config(format!(
                "row fraction must lie in [0, 1], got {}",
                self.row_fraction
            )));
        }
        if let Backend::Approximate { eps } = self.backend {
            if !(eps >= 0.0) {
                return Err(Error::Config(format!(
                    "approximation eps must be non-negative, got {}",
                    eps
                )));
            }
        }
        self.spec.validate()
    }
}

/// A peer column of some column `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neighbor {
    pub column: usize,
    /// `-1` when the negated column was the nearest point.
    pub sign: i8,
    /// Correlation of column `j` with this column (before the sign flip).
    pub cor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellFlag {
    Ok,
    High,
    Low,
    Missing,
}

impl CellFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            CellFlag::Ok => "ok",
            CellFlag::High => "high",
            CellFlag::Low => "low",
            CellFlag::Missing => "missing",
        }
    }

    pub fn is_flagged(self) -> bool {
        matches!(self, CellFlag::High | CellFlag::Low)
    }

    fn color(self) -> ppm::Rgb {
        match self {
            CellFlag::Ok => ppm::YELLOW,
            CellFlag::High => ppm::RED,
            CellFlag::Low => ppm::BLUE,
            CellFlag::Missing => ppm::WHITE,
        }
    }
}

/// Wrapped and standardized data together with the quantities needed to map
/// back to the original units.
#[derive(Debug, Clone)]
pub struct Standardized<T: Scalar> {
    /// Wrapped columns with mean 0 and sample sd 1; missing cells sit at the
    /// wrapped value of `μ̂`. Degenerate columns are zero.
    pub wrapped: DMatrix<f64>,
    /// Un-wrapped values in the same units; NaN where missing.
    pub original: DMatrix<f64>,
    pub models: Vec<Option<ColumnModel<T>>>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> Standardized<T> {
    pub fn is_degenerate(&self, j: usize) -> bool {
        self.models[j].is_none()
    }

    /// Standardized value `v` of column `j` in the original units.
    pub fn to_original(&self, j: usize, v: f64) -> f64 {
        match &self.models[j] {
            Some(m) => m.mu_hat.as_f64() + m.s_hat.as_f64() * (self.means[j] + self.sds[j] * v),
            None => self.means[j],
        }
    }
}

/// Fit each column, wrap it, and standardize the wrapped values to mean 0
/// and sample sd 1. Columns without spread are kept as zero columns and
/// reported in the warnings.
pub fn standardize<T: Scalar>(x: &DataMatrix<T>, spec: &PsiSpec) -> Result<Standardized<T>> {
    let (n, d) = (x.nrows(), x.ncols());
    if n < 3 {
        return Err(Error::Input("at least 3 observations are required".into()));
    }
    let fitted = (0..d)
        .into_par_iter()
        .map(
            |j| match univariate::fit_column(x.column(j), spec, x.name(j)) {
                Ok(m) => Ok(Some(m)),
                Err(Error::ZeroScale { .. }) => Ok(None),
                Err(e) => Err(e),
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let mut wrapped = DMatrix::<f64>::zeros(n, d);
    let mut original = DMatrix::<f64>::zeros(n, d);
    let mut means = vec![0.0; d];
    let mut sds = vec![1.0; d];
    let mut models = fitted;
    let mut warnings = Vec::new();
    for j in 0..d {
        let col = x.column(j);
        let Some(m) = &models[j] else {
            warnings.push(format!(
                "column '{}' has zero scale and is not flagged",
                x.name(j)
            ));
            means[j] = univariate::median(col).map_or(f64::NAN, |v| v.as_f64());
            for i in 0..n {
                original[(i, j)] = if col[i].is_nan() { f64::NAN } else { 0.0 };
            }
            continue;
        };
        let z: Vec<f64> = m.z_scores(col).iter().map(|v| v.as_f64()).collect();
        let w: Vec<f64> = z
            .iter()
            .map(|&v| if v.is_nan() { 0.0 } else { m.spec.psi(v) })
            .collect();
        let mean = w.iter().sum::<f64>() / n as f64;
        let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        if !(sd > 1e-12) {
            warnings.push(format!(
                "wrapped column '{}' is constant and is not flagged",
                x.name(j)
            ));
            means[j] = m.mu_hat.as_f64();
            models[j] = None;
            for i in 0..n {
                original[(i, j)] = if col[i].is_nan() { f64::NAN } else { 0.0 };
            }
            continue;
        }
        means[j] = mean;
        sds[j] = sd;
        for i in 0..n {
            wrapped[(i, j)] = (w[i] - mean) / sd;
            original[(i, j)] = (z[i] - mean) / sd;
        }
    }
    Ok(Standardized {
        wrapped,
        original,
        models,
        means,
        sds,
        warnings,
    })
}

fn check_standardized(v: &[f64], name: &str) -> Result<()> {
    let n = v.len();
    if n < 2 {
        return Err(Error::Input("at least 2 observations are required".into()));
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let sd = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if !(mean.abs() <= STANDARDIZED_TOL) || !((sd - 1.0).abs() <= STANDARDIZED_TOL) {
        return Err(Error::Contract(format!(
            "{} is not standardized (mean {:e}, sd {})",
            name, mean, sd
        )));
    }
    Ok(())
}

/// Correlation of two standardized columns from their Euclidean distance.
pub fn cor_from_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Input(format!(
            "length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    check_standardized(x, "x")?;
    check_standardized(y, "y")?;
    let dist2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - dist2 / (2.0 * (x.len() - 1) as f64))
}

/// Neighbor lists and the search dimension used.
#[derive(Debug, Clone, Serialize)]
pub struct NeighborLists {
    pub lists: Vec<Vec<Neighbor>>,
    pub q: usize,
}

/// Coordinates of the columns of `z` in the span of its top `q` left
/// singular vectors, one row per column. `None` keeps the full space.
fn reduced_coordinates(z: &DMatrix<f64>, q: ReducedDim) -> Result<(usize, Option<DMatrix<f64>>)> {
    let (n, d) = z.shape();
    let r = n.min(d);
    if let ReducedDim::Fixed(q) = q {
        if q == 0 || q > r {
            return Err(Error::Input(format!(
                "reduced dimension {} must lie in 1..={}",
                q, r
            )));
        }
    }
    if matches!(q, ReducedDim::Full) || q == ReducedDim::Fixed(n) {
        return Ok((n, None));
    }
    // spectrum of the smaller Gram matrix
    let (values, coords) = if n <= d {
        let (values, u) = linalg::sym_eigen(&(z * z.transpose()));
        (values, (z.transpose() * u))
    } else {
        let (values, v) = linalg::sym_eigen(&z.tr_mul(z));
        let mut c = v;
        for (i, mut col) in c.column_iter_mut().enumerate() {
            col *= values[i].max(0.0).sqrt();
        }
        (values, c)
    };
    let q = match q {
        ReducedDim::Fixed(q) => q,
        _ => {
            let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
            let mut acc = 0.0;
            let mut q = r;
            for (i, v) in values.iter().enumerate().take(r) {
                acc += v.max(0.0);
                if acc >= AUTO_MASS * total {
                    q = i + 1;
                    break;
                }
            }
            q
        }
    };
    if q >= n {
        return Ok((n, None));
    }
    Ok((q, Some(coords.columns(0, q).into_owned())))
}

/// For each column, its `k` nearest neighbors among all other columns and
/// their negations. Zero columns neither receive nor serve as neighbors.
pub fn neighbor_columns(
    z: &DMatrix<f64>,
    k: usize,
    q: ReducedDim,
    backend: Backend,
) -> Result<NeighborLists> {
    let (n, d) = z.shape();
    if k == 0 || k >= d {
        return Err(Error::Input(format!(
            "k = {} must lie in 1..{} for {} columns",
            k, d, d
        )));
    }
    let active: Vec<bool> = z
        .column_iter()
        .map(|c| c.iter().any(|v| *v != 0.0))
        .collect();
    let (q_used, reduced) = reduced_coordinates(z, q)?;
    let dim = q_used;
    let mut coords = Vec::with_capacity(2 * d * dim);
    for sign in [1.0, -1.0] {
        for j in 0..d {
            match &reduced {
                Some(c) => coords.extend(c.row(j).iter().map(|v| sign * v)),
                None => coords.extend(z.column(j).iter().map(|v| sign * v)),
            }
        }
    }
    let points = PointSet::new(dim, coords)?;
    let queries: Vec<Vec<f64>> = (0..d).map(|j| points.point(j).to_vec()).collect();
    let index = build_index(points, backend);
    let n_active = active.iter().filter(|a| **a).count();
    let want = (2 * k).min(2 * n_active.saturating_sub(1));
    let denom = (n - 1) as f64;
    let lists = (0..d)
        .into_par_iter()
        .map(|j| {
            if !active[j] {
                return Vec::new();
            }
            let skip = |i: usize| {
                let h = i % d;
                h == j || !active[h]
            };
            let mut seen = Vec::with_capacity(k);
            let mut out = Vec::with_capacity(k);
            for hit in index.knn(&queries[j], want, &skip) {
                let h = hit.index % d;
                if seen.contains(&h) {
                    continue;
                }
                seen.push(h);
                let cor = z.column(j).dot(&z.column(h)) / denom;
                out.push(Neighbor {
                    column: h,
                    sign: if hit.index < d { 1 } else { -1 },
                    cor: cor.clamp(-1.0, 1.0),
                });
                if out.len() == k {
                    break;
                }
            }
            out
        })
        .collect();
    Ok(NeighborLists { lists, q: q_used })
}

/// `ẑ_ij = Σ |r_h| r_h z_ih / Σ |r_h|` over the neighbors of `j` with
/// `|r_h| ≥ min_cor`, and 0 when none qualifies.
pub fn predict_cells(z: &DMatrix<f64>, neighbors: &[Vec<Neighbor>], min_cor: f64) -> DMatrix<f64> {
    let (n, d) = z.shape();
    let cols: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let used: Vec<&Neighbor> = neighbors[j]
                .iter()
                .filter(|nb| nb.cor.abs() >= min_cor)
                .collect();
            let wsum: f64 = used.iter().map(|nb| nb.cor.abs()).sum();
            let mut pred = vec![0.0; n];
            if wsum > 0.0 {
                for nb in used {
                    let coef = nb.cor.abs() * nb.cor / wsum;
                    for (p, v) in pred.iter_mut().zip(z.column(nb.column).iter()) {
                        *p += coef * v;
                    }
                }
            }
            pred
        })
        .collect();
    DMatrix::from_fn(n, d, |i, j| cols[j][i])
}

/// Standardized residuals and cell flags.
#[derive(Debug, Clone)]
pub struct CellFlags {
    pub stdres: DMatrix<f64>,
    pub flags: DMatrix<CellFlag>,
    pub cutoff: f64,
    pub warnings: Vec<String>,
}

/// Residuals `original − predicted` divided by each column's residual MAD,
/// flagged beyond `sqrt(χ²₁ quantile at p)`. NaN marks missing cells.
pub fn flag_cells(original: &DMatrix<f64>, predicted: &DMatrix<f64>, p: f64) -> Result<CellFlags> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Config(format!(
            "quantile p must lie in (0, 1), got {}",
            p
        )));
    }
    if original.shape() != predicted.shape() {
        return Err(Error::Input("observed and predicted shapes differ".into()));
    }
    let (n, d) = original.shape();
    let cutoff = chi_cutoff(1, p);
    let mut stdres = DMatrix::<f64>::zeros(n, d);
    let mut flags = DMatrix::from_element(n, d, CellFlag::Ok);
    let mut warnings = Vec::new();
    for j in 0..d {
        let resid: Vec<f64> = (0..n)
            .map(|i| original[(i, j)] - predicted[(i, j)])
            .collect();
        let amp =
            original
                .column(j)
                .iter()
                .fold(0.0f64, |a, v| if v.is_nan() { a } else { a.max(v.abs()) });
        let scale = univariate::residual_scale(&resid, amp);
        if scale.is_none() {
            warnings.push(format!(
                "column {} has zero residual scale and is not flagged",
                j
            ));
        }
        for i in 0..n {
            let r = resid[i];
            if r.is_nan() {
                stdres[(i, j)] = f64::NAN;
                flags[(i, j)] = CellFlag::Missing;
                continue;
            }
            let Some(s) = scale else { continue };
            let t = r / s;
            stdres[(i, j)] = t;
            if t.abs() > cutoff {
                flags[(i, j)] = if t > 0.0 {
                    CellFlag::High
                } else {
                    CellFlag::Low
                };
            }
        }
    }
    Ok(CellFlags {
        stdres,
        flags,
        cutoff,
        warnings,
    })
}

/// Output of [`fast_ddc`].
#[derive(Debug, Clone)]
pub struct CellFlagReport<T: Scalar> {
    pub names: Vec<String>,
    pub observed: DataMatrix<T>,
    /// Predicted cell values in the original units.
    pub predicted: DataMatrix<T>,
    pub stdres: DMatrix<f64>,
    pub flags: DMatrix<CellFlag>,
    /// Share of flagged cells among the observed cells of each row.
    pub row_outlyingness: Vec<f64>,
    pub row_flags: Vec<bool>,
    pub neighbors: Vec<Vec<Neighbor>>,
    pub cutoff: f64,
    pub q: usize,
    pub warnings: Vec<String>,
}

/// Which columns a cellmap shows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelection {
    All,
    Indices(Vec<usize>),
    /// The `m` columns with the most flagged cells, in original order.
    TopFlagged(usize),
}

/// Detect outlying cells of `x`.
pub fn fast_ddc<T: Scalar>(x: &DataMatrix<T>, opts: &DdcOptions) -> Result<CellFlagReport<T>> {
    opts.validate()?;
    let (n, d) = (x.nrows(), x.ncols());
    let st = standardize(x, &opts.spec)?;
    let nb = neighbor_columns(&st.wrapped, opts.k, opts.q, opts.backend)?;
    let pred = predict_cells(&st.wrapped, &nb.lists, opts.min_cor);
    let cf = flag_cells(&st.original, &pred, opts.p)?;
    let mut warnings = st.warnings.clone();
    for (j, m) in st.models.iter().enumerate() {
        if m.is_some()
            && cf
                .warnings
                .iter()
                .any(|w| w.starts_with(&format!("column {} ", j)))
        {
            warnings.push(format!(
                "column '{}' has zero residual scale and is not flagged",
                x.name(j)
            ));
        }
    }
    for w in &warnings {
        log::warn!("{}", w);
    }
    let predicted = DataMatrix::from_fn(n, d, |i, j| T::lit(st.to_original(j, pred[(i, j)])))
        .with_names(x.names().to_vec())?;
    let mut row_outlyingness = Vec::with_capacity(n);
    for i in 0..n {
        let row = cf.flags.row(i);
        let observed = row.iter().filter(|f| **f != CellFlag::Missing).count();
        let flagged = row.iter().filter(|f| f.is_flagged()).count();
        row_outlyingness.push(if observed == 0 {
            0.0
        } else {
            flagged as f64 / observed as f64
        });
    }
    let row_flags = row_outlyingness
        .iter()
        .map(|&f| f > opts.row_fraction)
        .collect();
    Ok(CellFlagReport {
        names: x.names().to_vec(),
        observed: x.clone(),
        predicted,
        stdres: cf.stdres,
        flags: cf.flags,
        row_outlyingness,
        row_flags,
        neighbors: nb.lists,
        cutoff: cf.cutoff,
        q: nb.q,
        warnings,
    })
}

impl<T: Scalar> CellFlagReport<T> {
    pub fn nrows(&self) -> usize {
        self.flags.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.flags.ncols()
    }

    pub fn flag(&self, i: usize, j: usize) -> CellFlag {
        self.flags[(i, j)]
    }

    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|f| f.is_flagged()).count()
    }

    pub fn column_flag_counts(&self) -> Vec<usize> {
        self.flags
            .column_iter()
            .map(|c| c.iter().filter(|f| f.is_flagged()).count())
            .collect()
    }

    /// Indices of the `m` columns with the most flagged cells, ties broken
    /// by column order, returned in column order.
    pub fn top_flagged_columns(&self, m: usize) -> Vec<usize> {
        let counts = self.column_flag_counts();
        let mut idx: Vec<usize> = (0..counts.len()).collect();
        idx.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        idx.truncate(m);
        idx.sort_unstable();
        idx
    }

    /// Flagged cells as `(row, column)` pairs in row-major order.
    pub fn flagged_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                if self.flags[(i, j)].is_flagged() {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// One line per flagged cell: row, column, observed, predicted, stdres,
    /// direction. Rows are 1-based.
    pub fn write_flags_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .flagged_cells()
            .into_iter()
            .map(|(i, j)| {
                vec![
                    (i + 1).to_string(),
                    self.names[j].clone(),
                    fmt_full(self.observed.get(i, j).as_f64()),
                    fmt_full(self.predicted.get(i, j).as_f64()),
                    fmt_full(self.stdres[(i, j)]),
                    self.flags[(i, j)].as_str().to_string(),
                ]
            })
            .collect();
        write_records(
            path,
            comment,
            &[
                "row",
                "column",
                "observed",
                "predicted",
                "stdres",
                "direction",
            ],
            &rows,
        )
    }

    /// Cellmap image with one `block × block` square per cell: yellow ok,
    /// red too high, blue too low, white missing.
    pub fn cellmap(
        &self,
        rows: Option<&[usize]>,
        columns: &ColumnSelection,
        block: usize,
    ) -> Result<Image> {
        let all_rows: Vec<usize> = (0..self.nrows()).collect();
        let rows = rows.unwrap_or(&all_rows);
        let cols = match columns {
            ColumnSelection::All => (0..self.ncols()).collect(),
            ColumnSelection::Indices(v) => v.clone(),
            ColumnSelection::TopFlagged(m) => self.top_flagged_columns(*m),
        };
        if rows.is_empty() || cols.is_empty() || block == 0 {
            return Err(Error::Input("cellmap selection is empty".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.nrows()) {
            return Err(Error::Input(format!("row {} out of range", bad)));
        }
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.ncols()) {
            return Err(Error::Input(format!("column {} out of range", bad)));
        }
        let mut img = Image::new(cols.len() * block, rows.len() * block, ppm::YELLOW);
        for (by, &i) in rows.iter().enumerate() {
            for (bx, &j) in cols.iter().enumerate() {
                img.fill_block(bx, by, block, self.flags[(i, j)].color());
            }
        }
        Ok(img)
    }

    pub fn export_cellmap(
        &self,
        rows: Option<&[usize]>,
        columns: &ColumnSelection,
        block: usize,
        path: impl AsRef<Path>,
    ) -> Result<()> {
        self.cellmap(rows, columns, block)?.write(path)
    }
}
