//! Robust principal components: the truncated SVD of the transformed and
//! centered data, applied afterwards to the original cases.

use nalgebra::DMatrix;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, TruncatedSvd};
use crate::ppm::{self, Image};
use crate::psi::PsiSpec;
use crate::scalar::Scalar;
use crate::special::chi_cutoff;
use crate::univariate::{self, ColumnModel};

/// Convergence tolerance of the subspace iteration.
pub const SVD_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct RobustPcaModel<T: Scalar> {
    pub columns: Vec<ColumnModel<T>>,
    /// Column means of the transformed data.
    pub center: Vec<f64>,
    /// `k × d` loadings with orthonormal rows.
    pub loadings: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub k: usize,
    pub spec: PsiSpec,
    pub iterations: usize,
}

/// Fit column models with `spec`, transform the data, center it and keep the
/// top `k` right singular vectors.
pub fn fit_rpca<T: Scalar>(
    x: &DataMatrix<T>,
    spec: &PsiSpec,
    k: usize,
) -> Result<RobustPcaModel<T>> {
    let columns = univariate::fit_columns(x, spec)?;
    fit_rpca_with(x, columns, k)
}

/// As [`fit_rpca`] with already fitted column models.
pub fn fit_rpca_with<T: Scalar>(
    x: &DataMatrix<T>,
    columns: Vec<ColumnModel<T>>,
    k: usize,
) -> Result<RobustPcaModel<T>> {
    let (n, d) = (x.nrows(), x.ncols());
    if k == 0 || k > n.min(d) {
        return Err(Error::Input(format!(
            "component count {} must lie in 1..={}",
            k,
            n.min(d)
        )));
    }
    let spec = columns
        .first()
        .map(|c| c.spec)
        .ok_or_else(|| Error::Input("no columns".into()))?;
    let transformed = univariate::transform_matrix(x, &columns)?;
    let mut a = DMatrix::from_column_slice(n, d, transformed.as_slice()).map(|v| v.as_f64());
    let mut center = Vec::with_capacity(d);
    for mut col in a.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
        center.push(m);
    }
    let TruncatedSvd {
        singular_values,
        vt,
        iterations,
        ..
    } = linalg::truncated_svd(&a, k, SVD_TOL, 0)?;
    Ok(RobustPcaModel {
        columns,
        center,
        loadings: vt,
        singular_values,
        k,
        spec,
        iterations,
    })
}

/// Residual mask of the original data against a fitted model.
#[derive(Debug, Clone)]
pub struct ResidualMask {
    /// `x̂_i = t_i V + x̄*`.
    pub fitted: DMatrix<f64>,
    /// Residuals divided by their column MAD; NaN where missing.
    pub normalized: DMatrix<f64>,
    pub mask: DMatrix<bool>,
    pub cutoff: f64,
    pub warnings: Vec<String>,
}

impl ResidualMask {
    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// White blocks for masked cells on grey.
    pub fn image(&self, block: usize) -> Result<Image> {
        let (n, d) = self.mask.shape();
        if n == 0 || d == 0 || block == 0 {
            return Err(Error::Input("empty mask image".into()));
        }
        let mut img = Image::new(d * block, n * block, ppm::GREY);
        for i in 0..n {
            for j in 0..d {
                if self.mask[(i, j)] {
                    img.fill_block(j, i, block, ppm::WHITE);
                }
            }
        }
        Ok(img)
    }
}

impl<T: Scalar> RobustPcaModel<T> {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn centered(&self, x: &DataMatrix<T>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::Input(format!(
                "model has {} variables, data has {}",
                self.dim(),
                x.ncols()
            )));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            let v = x.get(i, j);
            if v.is_nan() {
                0.0
            } else {
                v.as_f64() - self.center[j]
            }
        }))
    }

    /// `t_i = (x_i − x̄*) Vᵀ`, missing cells counted at `x̄*`.
    pub fn scores(&self, x: &DataMatrix<T>) -> Result<DMatrix<f64>> {
        Ok(self.centered(x)? * self.loadings.transpose())
    }

    /// Fitted values, residuals normalized by column MAD, and the mask of
    /// cells beyond `sqrt(χ²₁ quantile at p)`.
    pub fn residual_mask(&self, x: &DataMatrix<T>, p: f64) -> Result<ResidualMask> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!(
                "quantile p must lie in (0, 1), got {}",
                p
            )));
        }
        let centered = self.centered(x)?;
        let scores = &centered * self.loadings.transpose();
        let mut fitted = &scores * &self.loadings;
        for (j, mut col) in fitted.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.center[j]);
        }
        let (n, d) = (x.nrows(), x.ncols());
        let cutoff = chi_cutoff(1, p);
        let mut normalized = DMatrix::<f64>::zeros(n, d);
        let mut mask = DMatrix::from_element(n, d, false);
        let mut warnings = Vec::new();
        for j in 0..d {
            let resid: Vec<f64> = (0..n)
                .map(|i| x.get(i, j).as_f64() - fitted[(i, j)])
                .collect();
            let amp = x.column(j).iter().fold(0.0f64, |a, v| {
                if v.is_nan() {
                    a
                } else {
                    a.max(v.as_f64().abs())
                }
            });
            let scale = univariate::residual_scale(&resid, amp);
            if scale.is_none() {
                warnings.push(format!(
                    "column '{}' has zero residual scale and is not masked",
                    x.name(j)
                ));
            }
            for i in 0..n {
                let r = resid[i];
                normalized[(i, j)] = match scale {
                    _ if r.is_nan() => f64::NAN,
                    Some(s) => r / s,
                    None => 0.0,
                };
                mask[(i, j)] = normalized[(i, j)].abs() > cutoff;
            }
        }
        for w in &warnings {
            log::warn!("{}", w);
        }
        Ok(ResidualMask {
            fitted,
            normalized,
            mask,
            cutoff,
            warnings,
        })
    }
}
