//! Robust per-column location and scale, and the column transforms.
//!
//! For the ψ-families a column `x` is fitted by
//!
//! * `med` and `MAD` of the non-missing values,
//! * a one-step M-estimator of location started from the median,
//! * a one-step M-estimator of scale (or plain MAD, see [`ScaleRule`]),
//!
//! and transformed by `g(x) = μ̂ + ŝ·ψ((x − μ̂)/ŝ)`, with missing cells
//! mapped to `μ̂`. Rank families replace the column by centered scores
//! rescaled to standard deviation `ŝ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::psi::{PsiFamily, PsiSpec};
use crate::scalar::Scalar;

/// Gaussian consistency factor of the MAD.
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// Floor on the average slope in the one-step location update.
pub const SLOPE_FLOOR: f64 = 0.1;

/// How `ŝ` is obtained from the initial MAD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleRule {
    /// `ŝ = MAD`.
    Mad,
    /// `ŝ = MAD·sqrt(ave ψ(z)² / E_Φ[ψ²])` with `z = (x − med)/MAD`.
    #[default]
    OneStepM,
}

/// Robust location/scale of one variable and the ψ used to transform it.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnModel<T> {
    pub name: String,
    pub mu_hat: T,
    pub s_hat: T,
    pub spec: PsiSpec,
    pub n_obs: usize,
    pub n_missing: usize,
}

fn finite_f64<T: Scalar>(x: &[T]) -> Vec<f64> {
    x.iter()
        .filter(|v| !v.is_nan())
        .map(|v| v.as_f64())
        .collect()
}

/// Median of a scratch buffer (reordered in place).
fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (lower, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + upper)
    }
}

/// Median of the non-missing values; `None` when there are none.
pub fn median<T: Scalar>(x: &[T]) -> Option<T> {
    let mut v = finite_f64(x);
    if v.is_empty() {
        None
    } else {
        Some(T::lit(median_in_place(&mut v)))
    }
}

fn med_mad(v: &mut [f64], name: &str) -> Result<(f64, f64)> {
    if v.len() < 2 {
        return Err(Error::Input(format!(
            "column '{}' has {} non-missing values, at least 2 are required",
            name,
            v.len()
        )));
    }
    let med = median_in_place(v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    let mad = MAD_CONSISTENCY * median_in_place(&mut dev);
    if !(mad > 0.0) {
        return Err(Error::ZeroScale {
            column: name.to_string(),
        });
    }
    Ok((med, mad))
}

/// `1.4826 · median |x − median(x)|`, ignoring missing values.
pub fn mad<T: Scalar>(x: &[T]) -> Result<T> {
    mad_named(x, "<unnamed>")
}

pub fn mad_named<T: Scalar>(x: &[T], name: &str) -> Result<T> {
    let mut v = finite_f64(x);
    med_mad(&mut v, name).map(|(_, s)| T::lit(s))
}

/// MAD of residuals, or `None` when it vanishes relative to `magnitude`
/// (the size of the values the residuals were taken from).
pub fn residual_scale(resid: &[f64], magnitude: f64) -> Option<f64> {
    let mut v = finite_f64(resid);
    let (_, s) = med_mad(&mut v, "residual").ok()?;
    (s > 1e-10 * magnitude.abs()).then_some(s)
}

fn one_step_location(v: &[f64], med: f64, s: f64, spec: &PsiSpec) -> f64 {
    let n = v.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for &x in v {
        let z = (x - med) / s;
        num += spec.psi(z);
        den += spec.psi_derivative(z);
    }
    med + s * (num / n) / (den / n).max(SLOPE_FLOOR)
}

/// One Newton step for `Σ ψ((x_i − μ)/s) = 0` from the median, with the
/// average slope floored at [`SLOPE_FLOOR`].
pub fn one_step_m_location<T: Scalar>(x: &[T], s: T, spec: &PsiSpec) -> Result<T> {
    spec.validate()?;
    if !(s > T::zero()) || !s.is_finite() {
        return Err(Error::Input(format!(
            "scale must be positive and finite, got {}",
            s
        )));
    }
    let mut v = finite_f64(x);
    if v.is_empty() {
        return Err(Error::Input("no non-missing values".into()));
    }
    let med = median_in_place(&mut v);
    Ok(T::lit(one_step_location(&v, med, s.as_f64(), spec)))
}

#[derive(Debug, Clone, Copy)]
struct FitContext {
    spec: PsiSpec,
    scale: ScaleRule,
    gaussian_second_moment: f64,
}

impl FitContext {
    fn new(spec: &PsiSpec, scale: ScaleRule) -> Result<Self> {
        spec.validate()?;
        let gaussian_second_moment = match (spec.family(), scale) {
            (PsiFamily::Huber | PsiFamily::Sigmoid | PsiFamily::Wrapping, ScaleRule::OneStepM) => {
                spec.gaussian_second_moment()
            }
            _ => f64::NAN,
        };
        Ok(Self {
            spec: *spec,
            scale,
            gaussian_second_moment,
        })
    }

    fn fit<T: Scalar>(&self, x: &[T], name: &str) -> Result<ColumnModel<T>> {
        let mut v = finite_f64(x);
        let n_obs = v.len();
        let n_missing = x.len() - n_obs;
        let spec = &self.spec;
        let (med, s0) = med_mad(&mut v, name)?;
        let (mu, s) = match spec.family() {
            PsiFamily::Identity => {
                // the identity transform is the classical product moment
                let n = n_obs as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (mean, var.sqrt())
            }
            PsiFamily::Huber | PsiFamily::Sigmoid | PsiFamily::Wrapping => {
                let mu = one_step_location(&v, med, s0, spec);
                let s = match self.scale {
                    ScaleRule::Mad => s0,
                    ScaleRule::OneStepM => {
                        let ave = v
                            .iter()
                            .map(|&x| spec.psi((x - med) / s0).powi(2))
                            .sum::<f64>()
                            / n_obs as f64;
                        s0 * (ave / self.gaussian_second_moment).sqrt()
                    }
                };
                (mu, s)
            }
            _ => (med, s0),
        };
        if !(s > 0.0) || !s.is_finite() || !mu.is_finite() {
            return Err(Error::ZeroScale {
                column: name.to_string(),
            });
        }
        Ok(ColumnModel {
            name: name.to_string(),
            mu_hat: T::lit(mu),
            s_hat: T::lit(s),
            spec: *spec,
            n_obs,
            n_missing,
        })
    }
}

/// Fit one column with the default scale rule.
pub fn fit_column<T: Scalar>(x: &[T], spec: &PsiSpec, name: &str) -> Result<ColumnModel<T>> {
    FitContext::new(spec, ScaleRule::default())?.fit(x, name)
}

pub fn fit_column_with<T: Scalar>(
    x: &[T],
    spec: &PsiSpec,
    name: &str,
    scale: ScaleRule,
) -> Result<ColumnModel<T>> {
    FitContext::new(spec, scale)?.fit(x, name)
}

/// Fit every column of `X` in parallel.
pub fn fit_columns<T: Scalar>(x: &DataMatrix<T>, spec: &PsiSpec) -> Result<Vec<ColumnModel<T>>> {
    fit_columns_with(x, spec, ScaleRule::default())
}

pub fn fit_columns_with<T: Scalar>(
    x: &DataMatrix<T>,
    spec: &PsiSpec,
    scale: ScaleRule,
) -> Result<Vec<ColumnModel<T>>> {
    let ctx = FitContext::new(spec, scale)?;
    (0..x.ncols())
        .into_par_iter()
        .map(|j| ctx.fit(x.column(j), x.name(j)))
        .collect()
}

impl<T: Scalar> ColumnModel<T> {
    /// `(x − μ̂)/ŝ`, with NaN kept for missing cells.
    pub fn z_scores(&self, x: &[T]) -> Vec<T> {
        x.iter().map(|&v| (v - self.mu_hat) / self.s_hat).collect()
    }

    /// Apply the column transform: wrap for ψ-families, rescaled rank scores
    /// (shifted to `μ̂`) for rank families.
    pub fn transform(&self, x: &[T]) -> Result<Vec<T>> {
        if self.spec.is_rank() {
            let mut out =
                rank_transform_column(x, &self.spec, self.s_hat).map_err(|e| match e {
                    Error::ZeroVariance { .. } => Error::ZeroVariance {
                        column: self.name.clone(),
                    },
                    other => other,
                })?;
            out.iter_mut().for_each(|v| *v += self.mu_hat);
            Ok(out)
        } else {
            Ok(wrap_column(x, self))
        }
    }
}

/// `μ̂ + ŝ·ψ((x − μ̂)/ŝ)`; missing cells become `μ̂`.
pub fn wrap_column<T: Scalar>(x: &[T], model: &ColumnModel<T>) -> Vec<T> {
    let (mu, s) = (model.mu_hat, model.s_hat);
    let spec = &model.spec;
    x.iter()
        .map(|&v| {
            if v.is_nan() {
                mu
            } else {
                mu + s * spec.psi((v - mu) / s)
            }
        })
        .collect()
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn average_ranks<T: Scalar>(x: &[T]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("no missing values"));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let r = 0.5 * ((start + 1) + end) as f64;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// Rank scores `h((rank − 0.5)/n)`, centered and rescaled to sample
/// standard deviation `s_hat`.
pub fn rank_transform_column<T: Scalar>(x: &[T], spec: &PsiSpec, s_hat: T) -> Result<Vec<T>> {
    if !spec.is_rank() {
        return Err(Error::Config(format!(
            "'{}' is not a rank family",
            spec.family()
        )));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::Unsupported(
            "rank transforms do not accept missing values".into(),
        ));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Input(
            "rank transform needs at least 2 values".into(),
        ));
    }
    let nf = n as f64;
    let scores = average_ranks(x)
        .into_iter()
        .map(|r| spec.rank_score((r - 0.5) / nf))
        .collect::<Result<Vec<f64>>>()?;
    let mean = scores.iter().sum::<f64>() / nf;
    let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance {
            column: "<unnamed>".into(),
        });
    }
    let k = s_hat.as_f64() / sd;
    Ok(scores.into_iter().map(|s| T::lit((s - mean) * k)).collect())
}

/// Transform every column with its fitted model.
pub fn transform_matrix<T: Scalar>(
    x: &DataMatrix<T>,
    models: &[ColumnModel<T>],
) -> Result<DataMatrix<T>> {
    if models.len() != x.ncols() {
        return Err(Error::Input(format!(
            "{} column models for {} columns",
            models.len(),
            x.ncols()
        )));
    }
    let cols = (0..x.ncols())
        .into_par_iter()
        .map(|j| models[j].transform(x.column(j)))
        .collect::<Result<Vec<_>>>()?;
    DataMatrix::from_columns(cols)?.with_names(x.names().to_vec())
}
