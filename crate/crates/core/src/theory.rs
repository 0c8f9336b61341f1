//! Robustness theory of ψ-product moments at the bivariate Gaussian.
//!
//! All expectations are taken under `F_ρ`, generated as
//! `X = √(1−ρ)·U + √ρ·W`, `Y = √(1−ρ)·V + √ρ·W` with `U, V, W` independent
//! standard normals (for `ρ ≥ 0`; negative `ρ` follows from oddness of ψ).
//! Then `E_ρ[ψ(X)ψ(Y)] = ∫ m(w)² dΦ(w)` with `m(w) = E[ψ(√(1−ρ)U + √ρ·w)]`,
//! so every bivariate expectation reduces to nested one-dimensional
//! quadratures.
//!
//! Rank correlations are represented by their population transform
//! `ψ(x) = h(Φ(x))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::psi::{PsiFamily, PsiSpec};
use crate::quad::{brent, Quadrature};
use crate::special::{norm_cdf, norm_quantile};

/// Step of the central difference used for `ξ'(ρ)`.
pub const XI_STEP: f64 = 1e-4;

/// Gaussian moments of ψ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiMoments {
    /// `E[ψ'(Z)]`, with jumps counted through `E[Zψ(Z)]`.
    pub mean_slope: f64,
    /// `E[ψ(Z)²]`.
    pub second_moment: f64,
    /// `M = sup |ψ|`.
    pub sup: f64,
}

/// One row of the property table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub label: String,
    pub breakdown: f64,
    pub efficiency: f64,
    pub gross_error_sensitivity: f64,
    pub rejection_point: f64,
    pub cor_x_gx: f64,
}

/// Upper and lower maxbias over a grid of contamination fractions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCurve {
    pub rho: f64,
    pub eps: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub sup: f64,
    pub variance: f64,
}

fn quad() -> Quadrature {
    Quadrature::with_tol(1e-12)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Input(format!(
            "correlation must satisfy |rho| < 1, got {}",
            rho
        )));
    }
    Ok(())
}

pub fn psi_moments(spec: &PsiSpec) -> Result<PsiMoments> {
    spec.validate()?;
    Ok(PsiMoments {
        mean_slope: spec.gaussian_mean_slope(),
        second_moment: spec.gaussian_second_moment(),
        sup: spec.sup_abs(),
    })
}

/// `E[Zψ(Z)]`, equal to `E[ψ']` by Stein's identity.
pub fn stein_slope(spec: &PsiSpec) -> Result<f64> {
    spec.validate()?;
    Ok(quad().gaussian_expectation(|z| z * spec.psi(z), &spec.breakpoints()))
}

/// `(E[ψ']² / E[ψ²])²`.
pub fn efficiency(spec: &PsiSpec) -> Result<f64> {
    Ok(location_efficiency(spec)?.powi(2))
}

/// Efficiency `E[ψ']²/E[ψ²]` of the location M-estimator with the same ψ.
pub fn location_efficiency(spec: &PsiSpec) -> Result<f64> {
    let m = psi_moments(spec)?;
    Ok(m.mean_slope.powi(2) / m.second_moment)
}

/// `γ* = (M / E[ψ'])²`, infinite for unbounded ψ.
pub fn gross_error_sensitivity(spec: &PsiSpec) -> Result<f64> {
    let m = psi_moments(spec)?;
    Ok((m.sup / m.mean_slope).powi(2))
}

/// `E[ψ(Z)²] / (E[ψ(Z)²] + M²)`; zero for unbounded ψ.
pub fn psi_breakdown(spec: &PsiSpec) -> Result<f64> {
    let m = psi_moments(spec)?;
    if m.sup.is_infinite() {
        return Ok(0.0);
    }
    Ok(m.second_moment / (m.second_moment + m.sup * m.sup))
}

/// Breakdown value of a rank correlation with centered score `h`.
///
/// With perfectly dependent data the worst contamination takes the mass
/// `ε/2` from each end of the score range and pairs the two ends in reverse
/// order. The remaining correlation is proportional to
///
/// ```text
/// ∫_{ε/2}^{1−ε/2} h(u)² du + 2 ∫_0^{ε/2} h(1 − ε/2 + s) h(ε/2 − s) ds
/// ```
///
/// and `ε*` is its root.
pub fn rank_breakdown(spec: &PsiSpec) -> Result<f64> {
    if !spec.is_rank() {
        return Err(Error::Config(format!(
            "'{}' is not a rank family",
            spec.family()
        )));
    }
    let h = |u: f64| spec.psi(norm_quantile(u));
    let q = Quadrature::with_tol(1e-13);
    let breaks: Vec<f64> = spec.breakpoints().iter().map(|&z| norm_cdf(z)).collect();
    let pieces = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        let mut pts = vec![lo];
        pts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
        pts.push(hi);
        q.integrate_pieces(f, &pts)
    };
    let cov = |eps: f64| {
        let e = 0.5 * eps;
        let core = pieces(e, 1.0 - e, &|u| h(u).powi(2));
        // the cross term is integrated in s ∈ (0, e), so breaks are mapped
        let cross = {
            let f = |s: f64| h(1.0 - e + s) * h(e - s);
            let mut pts = vec![0.0];
            for &b in &breaks {
                for s in [b - (1.0 - e), e - b] {
                    if s > 0.0 && s < e {
                        pts.push(s);
                    }
                }
            }
            pts.push(e);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            q.integrate_pieces(f, &pts)
        };
        core + 2.0 * cross
    };
    brent(cov, 1e-9, 1.0 - 1e-9, 1e-12, 200).ok_or_else(|| Error::SolverFailure {
        message: format!(
            "no sign change in the rank breakdown equation for {}",
            spec.label()
        ),
        residual: f64::NAN,
    })
}

/// Breakdown value: the ψ formula for ψ-families, the rank construction
/// for rank families.
pub fn breakdown_value(spec: &PsiSpec) -> Result<f64> {
    if spec.is_rank() {
        rank_breakdown(spec)
    } else {
        psi_breakdown(spec)
    }
}

/// `Cor(X, ψ(X)) = E[Xψ(X)] / sqrt(E[ψ²])` for standard normal `X`.
pub fn cor_x_gx(spec: &PsiSpec) -> Result<f64> {
    let m = psi_moments(spec)?;
    Ok(stein_slope(spec)? / m.second_moment.sqrt())
}

/// `E_ρ[ψ(X)ψ(Y)]`.
pub fn xi_raw(spec: &PsiSpec, rho: f64) -> Result<f64> {
    spec.validate()?;
    if !(rho.abs() <= 1.0) {
        return Err(Error::Input(format!(
            "correlation must satisfy |rho| ≤ 1, got {}",
            rho
        )));
    }
    if rho < 0.0 {
        return xi_raw(spec, -rho).map(|v| -v);
    }
    let q = quad();
    let bps = spec.breakpoints();
    if rho == 0.0 {
        return Ok(0.0);
    }
    if 1.0 - rho < 1e-14 {
        return Ok(spec.gaussian_second_moment());
    }
    let a = (1.0 - rho).sqrt();
    let c = rho.sqrt();
    let m = |w: f64| {
        let inner: Vec<f64> = bps.iter().map(|&b| (b - c * w) / a).collect();
        q.gaussian_expectation(|u| spec.psi(a * u + c * w), &inner)
    };
    let outer: Vec<f64> = bps.iter().map(|&b| b / c).collect();
    Ok(q.gaussian_expectation(|w| m(w).powi(2), &outer))
}

/// `ξ(ρ) = Cor(ψ(X), ψ(Y))` under `F_ρ`.
pub fn xi_curve(spec: &PsiSpec, rho: f64) -> Result<f64> {
    Ok(xi_raw(spec, rho)? / spec.gaussian_second_moment())
}

/// Inverse of [`xi_raw`] by root finding on `(−1, 1)`.
pub fn xi_raw_inverse(spec: &PsiSpec, value: f64) -> Result<f64> {
    let top = spec.gaussian_second_moment();
    if !(value.abs() < top) {
        return Err(Error::Input(format!("{} is outside the range of ξ", value)));
    }
    brent(
        |r| xi_raw(spec, r).map(|v| v - value).unwrap_or(f64::NAN),
        -1.0,
        1.0,
        1e-14,
        200,
    )
    .ok_or_else(|| Error::SolverFailure {
        message: "inverting ξ".into(),
        residual: f64::NAN,
    })
}

/// `ξ'(ρ)` of the raw moment: analytic `E[ψ']²` at zero, otherwise a
/// central difference.
pub fn xi_raw_derivative(spec: &PsiSpec, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if rho == 0.0 {
        return Ok(spec.gaussian_mean_slope().powi(2));
    }
    let h = XI_STEP.min(0.5 * (1.0 - rho.abs()));
    Ok((xi_raw(spec, rho + h)? - xi_raw(spec, rho - h)?) / (2.0 * h))
}

/// Centering and scaling constants `C_ρ`, `D_ρ` of the influence function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfluenceConstants {
    pub rho: f64,
    pub c_rho: f64,
    pub d_rho: f64,
}

pub fn influence_constants(spec: &PsiSpec, rho: f64) -> Result<InfluenceConstants> {
    check_rho(rho)?;
    Ok(InfluenceConstants {
        rho,
        c_rho: xi_raw(spec, rho)?,
        d_rho: xi_raw_derivative(spec, rho)?,
    })
}

/// `IF((x, y)) = (ψ(x)ψ(y) − C_ρ) / D_ρ` at each grid point.
pub fn influence_surface(spec: &PsiSpec, rho: f64, grid: &[(f64, f64)]) -> Result<Vec<f64>> {
    let k = influence_constants(spec, rho)?;
    grid.iter()
        .map(|&(x, y)| {
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::Input(format!(
                    "non-finite grid point ({}, {})",
                    x, y
                )));
            }
            Ok((spec.psi(x) * spec.psi(y) - k.c_rho) / k.d_rho)
        })
        .collect()
}

/// Closed-form maxbias `(B⁺, B⁻)` under ε-contamination of `F_ρ`.
pub fn maxbias(spec: &PsiSpec, eps: f64, rho: f64) -> Result<(f64, f64)> {
    check_rho(rho)?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Input(format!("eps must lie in [0, 1), got {}", eps)));
    }
    let m = psi_moments(spec)?;
    if m.sup.is_infinite() {
        return Err(Error::Unsupported(format!(
            "maxbias of unbounded {}",
            spec.label()
        )));
    }
    let t = xi_raw(spec, rho)? / m.second_moment;
    Ok(maxbias_with(m.second_moment, m.sup, t, eps))
}

fn maxbias_with(v: f64, sup: f64, t: f64, eps: f64) -> (f64, f64) {
    let clean = (1.0 - eps) * v;
    let out = eps * sup * sup;
    let denom = clean + out;
    ((clean * t + out) / denom - t, (clean * t - out) / denom - t)
}

pub fn bias_curve(spec: &PsiSpec, rho: f64, eps: &[f64]) -> Result<BiasCurve> {
    check_rho(rho)?;
    let m = psi_moments(spec)?;
    if m.sup.is_infinite() {
        return Err(Error::Unsupported(format!(
            "maxbias of unbounded {}",
            spec.label()
        )));
    }
    if let Some(e) = eps.iter().find(|e| !(0.0..1.0).contains(*e)) {
        return Err(Error::Input(format!("eps must lie in [0, 1), got {}", e)));
    }
    let t = xi_raw(spec, rho)? / m.second_moment;
    let (upper, lower) = eps
        .iter()
        .map(|&e| maxbias_with(m.second_moment, m.sup, t, e))
        .unzip();
    Ok(BiasCurve {
        rho,
        eps: eps.to_vec(),
        upper,
        lower,
        sup: m.sup,
        variance: m.second_moment,
    })
}

pub fn theory_report(spec: &PsiSpec) -> Result<TheoryReport> {
    Ok(TheoryReport {
        label: spec.label(),
        breakdown: breakdown_value(spec)?,
        efficiency: efficiency(spec)?,
        gross_error_sensitivity: gross_error_sensitivity(spec)?,
        rejection_point: spec.rejection_point(),
        cor_x_gx: cor_x_gx(spec)?,
    })
}

/// Property rows for several transforms.
pub fn table2(specs: &[PsiSpec]) -> Result<Vec<TheoryReport>> {
    specs.iter().map(theory_report).collect()
}

/// The transforms of the standard property table, Pearson first.
pub fn standard_specs() -> Result<Vec<PsiSpec>> {
    Ok(vec![
        PsiSpec::identity(),
        PsiSpec::quadrant(),
        PsiSpec::spearman(),
        PsiSpec::normal_scores(),
        PsiSpec::truncated_normal_scores(0.05)?,
        PsiSpec::truncated_normal_scores(0.1)?,
        PsiSpec::sigmoid(),
        PsiSpec::huber(norm_quantile(0.95))?,
        PsiSpec::huber(norm_quantile(0.9))?,
        PsiSpec::default_wrapping(),
        PsiSpec::wrapping(1.3, 4.0)?,
    ])
}

/// Closed forms used as cross-checks for a few families.
pub fn known_xi(family: PsiFamily, rho: f64) -> Option<f64> {
    use std::f64::consts::PI;
    match family {
        PsiFamily::Identity | PsiFamily::RankNormalScores => Some(rho),
        PsiFamily::Sign | PsiFamily::RankQuadrant => Some(2.0 / PI * rho.asin()),
        PsiFamily::RankSpearman => Some(6.0 / PI * (0.5 * rho).asin()),
        _ => None,
    }
}

/// `E[ψ'(Z)]` by integrating the derivative directly, for families without
/// jumps. Used to cross-check the slope through Stein's identity.
pub fn slope_by_derivative(spec: &PsiSpec) -> Result<f64> {
    spec.validate()?;
    if matches!(spec.family(), PsiFamily::Sign | PsiFamily::RankQuadrant) {
        return Err(Error::Unsupported("ψ has a jump".into()));
    }
    Ok(quad().gaussian_expectation(|z| spec.psi_derivative(z), &spec.breakpoints()))
}
