//! Transform families ψ and the wrapping-constant solver.
//!
//! Every family is an odd function of a robust z-score. The ψ-families
//! (identity, sign, Huber, sigmoid, wrapping) are applied directly; the rank
//! families act on rescaled ranks `u = (rank - 0.5) / n` through a score
//! function `h(u)`, and for theory and for [`PsiSpec::psi`] they are
//! represented by their population version `ψ(z) = h(Φ(z))`.
//!
//! The wrapping function with corner `b` and rejection point `c` is
//!
//! ```text
//!          ⎧ z                                 |z| ≤ b
//! ψ(z) =   ⎨ q1·tanh(q2·(c − |z|))·sign(z)     b ≤ |z| ≤ c
//!          ⎩ 0                                 |z| ≥ c
//! ```
//!
//! where `q1 = sqrt(A(k−1))`, `q2 = (B/2)·sqrt((k−1)/A)` and the constants
//! `A = ∫ψ² dΦ`, `B = ∫ψ' dΦ`, `k` must be solved jointly with the
//! continuity condition `q1·tanh(q2(c − b)) = b`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::config::{KeyValueWriter, KeyValues};
use crate::error::{Error, Result};
use crate::quad::{brent, Quadrature};
use crate::scalar::Scalar;
use crate::special::{norm_cdf, norm_pdf, norm_quantile, FRAC_1_SQRT_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiFamily {
    Identity,
    Sign,
    Huber,
    Sigmoid,
    Wrapping,
    RankSpearman,
    RankQuadrant,
    RankNormalScores,
    RankTruncatedNs,
}

impl PsiFamily {
    pub const ALL: [PsiFamily; 9] = [
        PsiFamily::Identity,
        PsiFamily::Sign,
        PsiFamily::Huber,
        PsiFamily::Sigmoid,
        PsiFamily::Wrapping,
        PsiFamily::RankSpearman,
        PsiFamily::RankQuadrant,
        PsiFamily::RankNormalScores,
        PsiFamily::RankTruncatedNs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PsiFamily::Identity => "identity",
            PsiFamily::Sign => "sign",
            PsiFamily::Huber => "huber",
            PsiFamily::Sigmoid => "sigmoid",
            PsiFamily::Wrapping => "wrapping",
            PsiFamily::RankSpearman => "rank-spearman",
            PsiFamily::RankQuadrant => "rank-quadrant",
            PsiFamily::RankNormalScores => "rank-normal-scores",
            PsiFamily::RankTruncatedNs => "rank-truncated-ns",
        }
    }

    pub fn is_rank(self) -> bool {
        matches!(
            self,
            PsiFamily::RankSpearman
                | PsiFamily::RankQuadrant
                | PsiFamily::RankNormalScores
                | PsiFamily::RankTruncatedNs
        )
    }
}

impl fmt::Display for PsiFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PsiFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let family = match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "none" | "pearson" | "classical" => PsiFamily::Identity,
            "sign" => PsiFamily::Sign,
            "huber" => PsiFamily::Huber,
            "sigmoid" | "tanh" => PsiFamily::Sigmoid,
            "wrapping" | "wrap" => PsiFamily::Wrapping,
            "rank-spearman" | "spearman" => PsiFamily::RankSpearman,
            "rank-quadrant" | "quadrant" => PsiFamily::RankQuadrant,
            "rank-normal-scores" | "normal-scores" | "ns" => PsiFamily::RankNormalScores,
            "rank-truncated-ns" | "truncated-ns" | "tns" => PsiFamily::RankTruncatedNs,
            other => {
                return Err(Error::Config(format!(
                    "unknown transform family '{}'",
                    other
                )))
            }
        };
        Ok(family)
    }
}

/// Derived constants of the wrapping function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrapConstants {
    /// `A = E[ψ²]` under the standard normal.
    pub second_moment: f64,
    /// `B = E[ψ']` under the standard normal.
    pub mean_slope: f64,
    /// Change-of-variance sensitivity `k`.
    pub kappa: f64,
    pub q1: f64,
    pub q2: f64,
}

/// A transform family together with its tuning constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PsiSpec {
    family: PsiFamily,
    b: f64,
    c: f64,
    alpha: f64,
    wrap: Option<WrapConstants>,
}

/// Unused constants are NaN and compare equal to each other.
impl PartialEq for PsiSpec {
    fn eq(&self, other: &Self) -> bool {
        let same = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        self.family == other.family
            && same(self.b, other.b)
            && same(self.c, other.c)
            && same(self.alpha, other.alpha)
            && self.wrap == other.wrap
    }
}

impl PsiSpec {
    fn plain(family: PsiFamily) -> Self {
        Self {
            family,
            b: f64::NAN,
            c: f64::NAN,
            alpha: f64::NAN,
            wrap: None,
        }
    }

    pub fn identity() -> Self {
        Self::plain(PsiFamily::Identity)
    }

    pub fn sign() -> Self {
        Self::plain(PsiFamily::Sign)
    }

    pub fn sigmoid() -> Self {
        Self::plain(PsiFamily::Sigmoid)
    }

    pub fn huber(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Config(format!(
                "huber corner b must be positive and finite, got {}",
                b
            )));
        }
        Ok(Self {
            b,
            ..Self::plain(PsiFamily::Huber)
        })
    }

    /// Wrapping function with constants solved to `1e-10`.
    pub fn wrapping(b: f64, c: f64) -> Result<Self> {
        solve_wrapping_constants(b, c, 1e-10)
    }

    /// The default wrapping function `b = 1.5`, `c = 4`, solved once per process.
    pub fn default_wrapping() -> Self {
        static DEFAULT: OnceLock<PsiSpec> = OnceLock::new();
        *DEFAULT.get_or_init(|| Self::wrapping(1.5, 4.0).expect("default wrapping constants solve"))
    }

    /// Wrapping family without derived constants. Evaluation fails until the
    /// constants are attached with [`PsiSpec::solved`].
    pub fn wrapping_unsolved(b: f64, c: f64) -> Result<Self> {
        check_corners(b, c)?;
        Ok(Self {
            b,
            c,
            ..Self::plain(PsiFamily::Wrapping)
        })
    }

    /// Wrapping family with externally supplied constants (e.g. from a cache).
    pub fn wrapping_with_constants(b: f64, c: f64, constants: WrapConstants) -> Result<Self> {
        check_corners(b, c)?;
        let spec = Self {
            b,
            c,
            wrap: Some(constants),
            ..Self::plain(PsiFamily::Wrapping)
        };
        let gap = (constants.q1 * (constants.q2 * (c - b)).tanh() - b).abs();
        if !(gap < 1e-7) || !(constants.q1 > 0.0 && constants.q2 > 0.0) {
            return Err(Error::Config(format!(
                "wrapping constants are not continuous at b (gap {:.3e})",
                gap
            )));
        }
        Ok(spec)
    }

    pub fn spearman() -> Self {
        Self::plain(PsiFamily::RankSpearman)
    }

    pub fn quadrant() -> Self {
        Self::plain(PsiFamily::RankQuadrant)
    }

    pub fn normal_scores() -> Self {
        Self::plain(PsiFamily::RankNormalScores)
    }

    pub fn truncated_normal_scores(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::Config(format!(
                "truncation alpha must lie in (0, 0.5), got {}",
                alpha
            )));
        }
        Ok(Self {
            alpha,
            b: norm_quantile(1.0 - alpha),
            ..Self::plain(PsiFamily::RankTruncatedNs)
        })
    }

    /// Build a spec from a family and the raw tuning constants, solving the
    /// wrapping constants when needed. Missing constants take the defaults
    /// `b = 1.5`, `c = 4`, `alpha = 0.05`.
    pub fn build(
        family: PsiFamily,
        b: Option<f64>,
        c: Option<f64>,
        alpha: Option<f64>,
    ) -> Result<Self> {
        match family {
            PsiFamily::Identity => Ok(Self::identity()),
            PsiFamily::Sign => Ok(Self::sign()),
            PsiFamily::Sigmoid => Ok(Self::sigmoid()),
            PsiFamily::Huber => Self::huber(b.unwrap_or(1.5)),
            PsiFamily::Wrapping => {
                let (b, c) = (b.unwrap_or(1.5), c.unwrap_or(4.0));
                if b == 1.5 && c == 4.0 {
                    Ok(Self::default_wrapping())
                } else {
                    Self::wrapping(b, c)
                }
            }
            PsiFamily::RankSpearman => Ok(Self::spearman()),
            PsiFamily::RankQuadrant => Ok(Self::quadrant()),
            PsiFamily::RankNormalScores => Ok(Self::normal_scores()),
            PsiFamily::RankTruncatedNs => Self::truncated_normal_scores(alpha.unwrap_or(0.05)),
        }
    }

    pub fn family(&self) -> PsiFamily {
        self.family
    }

    /// Corner point (Huber, wrapping, and the equivalent clip point of
    /// truncated normal scores); NaN for other families.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn constants(&self) -> Option<&WrapConstants> {
        self.wrap.as_ref()
    }

    pub fn is_rank(&self) -> bool {
        self.family.is_rank()
    }

    /// Return a copy with wrapping constants attached.
    pub fn solved(self, tol: f64) -> Result<Self> {
        if self.family == PsiFamily::Wrapping && self.wrap.is_none() {
            solve_wrapping_constants(self.b, self.c, tol)
        } else {
            Ok(self)
        }
    }

    /// Short human-readable label, e.g. `wrapping(b=1.5,c=4)`.
    pub fn label(&self) -> String {
        match self.family {
            PsiFamily::Huber => format!("huber(b={})", self.b),
            PsiFamily::Wrapping => format!("wrapping(b={},c={})", self.b, self.c),
            PsiFamily::RankTruncatedNs => format!("rank-truncated-ns(alpha={})", self.alpha),
            f => f.as_str().to_string(),
        }
    }

    /// Check that the spec can be evaluated.
    pub fn validate(&self) -> Result<()> {
        if self.family == PsiFamily::Wrapping && self.wrap.is_none() {
            return Err(Error::Config(format!(
                "wrapping constants for b={}, c={} have not been solved",
                self.b, self.c
            )));
        }
        Ok(())
    }

    /// ψ(z) with input checking.
    pub fn eval_psi<T: Scalar>(&self, z: T) -> Result<T> {
        self.validate()?;
        if !z.is_finite() {
            return Err(Error::Input(format!("non-finite argument {} to psi", z)));
        }
        Ok(self.psi(z))
    }

    /// w(z) = ψ(z)/z with w = 1 on the identity core and at zero.
    pub fn eval_weight<T: Scalar>(&self, z: T) -> Result<T> {
        self.validate()?;
        if !z.is_finite() {
            return Err(Error::Input(format!("non-finite argument {} to weight", z)));
        }
        Ok(self.weight(z))
    }

    /// ψ'(z) with input checking. At corners the inner one-sided derivative
    /// is returned.
    pub fn eval_psi_derivative<T: Scalar>(&self, z: T) -> Result<T> {
        self.validate()?;
        if !z.is_finite() {
            return Err(Error::Input(format!("non-finite argument {} to psi'", z)));
        }
        Ok(self.psi_derivative(z))
    }

    /// ψ(z) without checks. Callers must have called [`PsiSpec::validate`].
    #[inline]
    pub fn psi<T: Scalar>(&self, z: T) -> T {
        let a = z.abs();
        let value = match self.family {
            PsiFamily::Identity | PsiFamily::RankNormalScores => a,
            PsiFamily::Sign | PsiFamily::RankQuadrant => {
                if a > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            PsiFamily::Huber | PsiFamily::RankTruncatedNs => a.min(T::lit(self.b)),
            PsiFamily::Sigmoid => a.tanh(),
            PsiFamily::Wrapping => {
                let w = self.wrap.as_ref().expect("wrapping constants are solved");
                let (b, c) = (T::lit(self.b), T::lit(self.c));
                if a <= b {
                    a
                } else if a < c {
                    T::lit(w.q1) * (T::lit(w.q2) * (c - a)).tanh()
                } else {
                    T::zero()
                }
            }
            PsiFamily::RankSpearman => T::lit(norm_cdf(a.as_f64()) - 0.5),
        };
        // odd symmetry is imposed here so that ψ(−z) = −ψ(z) holds bit for bit
        if z.is_sign_negative() {
            -value
        } else {
            value
        }
    }

    #[inline]
    pub fn weight<T: Scalar>(&self, z: T) -> T {
        let a = z.abs();
        if a == T::zero() {
            return T::one();
        }
        if matches!(
            self.family,
            PsiFamily::Huber | PsiFamily::Wrapping | PsiFamily::RankTruncatedNs
        ) && a <= T::lit(self.b)
        {
            return T::one();
        }
        self.psi(a) / a
    }

    #[inline]
    pub fn psi_derivative<T: Scalar>(&self, z: T) -> T {
        let a = z.abs();
        match self.family {
            PsiFamily::Identity | PsiFamily::RankNormalScores => T::one(),
            PsiFamily::Sign | PsiFamily::RankQuadrant => T::zero(),
            PsiFamily::Huber | PsiFamily::RankTruncatedNs => {
                if a <= T::lit(self.b) {
                    T::one()
                } else {
                    T::zero()
                }
            }
            PsiFamily::Sigmoid => {
                let t = a.tanh();
                T::one() - t * t
            }
            PsiFamily::Wrapping => {
                let w = self.wrap.as_ref().expect("wrapping constants are solved");
                let (b, c) = (T::lit(self.b), T::lit(self.c));
                if a <= b {
                    T::one()
                } else if a <= c {
                    let t = (T::lit(w.q2) * (c - a)).tanh();
                    -T::lit(w.q1 * w.q2) * (T::one() - t * t)
                } else {
                    T::zero()
                }
            }
            PsiFamily::RankSpearman => T::lit(norm_pdf(a.as_f64())),
        }
    }

    /// `M = sup |ψ|`; infinite for unbounded families.
    pub fn sup_abs(&self) -> f64 {
        match self.family {
            PsiFamily::Identity | PsiFamily::RankNormalScores => f64::INFINITY,
            PsiFamily::Sign | PsiFamily::RankQuadrant | PsiFamily::Sigmoid => 1.0,
            PsiFamily::Huber | PsiFamily::Wrapping | PsiFamily::RankTruncatedNs => self.b,
            PsiFamily::RankSpearman => 0.5,
        }
    }

    /// A point `z > 0` with `|ψ(z)|` equal (or numerically equal) to `M`.
    ///
    /// For redescending ψ this is the corner `b`; for monotone bounded ψ any
    /// far point works and 50 is returned.
    pub fn extreme_point(&self) -> f64 {
        match self.family {
            PsiFamily::Wrapping => self.b,
            _ => 50.0,
        }
    }

    /// Points where ψ is not differentiable.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.family {
            PsiFamily::Wrapping => vec![-self.c, -self.b, self.b, self.c],
            PsiFamily::Huber | PsiFamily::RankTruncatedNs => vec![-self.b, self.b],
            PsiFamily::Sign | PsiFamily::RankQuadrant => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// Rejection point δ*: infinite unless ψ vanishes outside `[-c, c]`.
    pub fn rejection_point(&self) -> f64 {
        match self.family {
            PsiFamily::Wrapping => self.c,
            _ => f64::INFINITY,
        }
    }

    /// `E[ψ(Z)²]` for standard normal `Z`.
    pub fn gaussian_second_moment(&self) -> f64 {
        if let Some(w) = &self.wrap {
            return w.second_moment;
        }
        match self.family {
            PsiFamily::Identity | PsiFamily::RankNormalScores => 1.0,
            PsiFamily::Sign | PsiFamily::RankQuadrant => 1.0,
            PsiFamily::RankSpearman => 1.0 / 12.0,
            _ => Quadrature::default()
                .gaussian_expectation(|z| self.psi(z).powi(2), &self.breakpoints()),
        }
    }

    /// `E[ψ'(Z)]` for standard normal `Z`, with the jump of sign-type ψ at
    /// zero contributing `2φ(0)`.
    pub fn gaussian_mean_slope(&self) -> f64 {
        if let Some(w) = &self.wrap {
            return w.mean_slope;
        }
        match self.family {
            PsiFamily::Identity | PsiFamily::RankNormalScores => 1.0,
            PsiFamily::Sign | PsiFamily::RankQuadrant => 2.0 * FRAC_1_SQRT_2PI,
            PsiFamily::RankSpearman => 0.5 / std::f64::consts::PI.sqrt(),
            PsiFamily::Huber | PsiFamily::RankTruncatedNs => 2.0 * norm_cdf(self.b) - 1.0,
            _ => Quadrature::default()
                .gaussian_expectation(|z| self.psi_derivative(z), &self.breakpoints()),
        }
    }

    /// Score `h(u)` of a rescaled rank `u ∈ (0, 1)`.
    pub fn rank_score(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Input(format!(
                "rescaled rank must lie in (0, 1), got {}",
                u
            )));
        }
        match self.family {
            PsiFamily::RankSpearman => Ok(u),
            PsiFamily::RankQuadrant => Ok(if u > 0.5 {
                1.0
            } else if u < 0.5 {
                -1.0
            } else {
                0.0
            }),
            PsiFamily::RankNormalScores => Ok(norm_quantile(u)),
            PsiFamily::RankTruncatedNs => Ok(norm_quantile(u.clamp(self.alpha, 1.0 - self.alpha))),
            f => Err(Error::Config(format!("'{}' is not a rank family", f))),
        }
    }

    /// Serialize to the plain-text key-value format. Derived wrapping
    /// constants are written to 10 significant digits.
    pub fn to_config(&self) -> String {
        let mut w = KeyValueWriter::new();
        w.entry("family", self.family);
        if self.b.is_finite() && self.family != PsiFamily::RankTruncatedNs {
            w.entry("b", self.b);
        }
        if self.c.is_finite() {
            w.entry("c", self.c);
        }
        if self.alpha.is_finite() {
            w.entry("alpha", self.alpha);
        }
        if let Some(k) = &self.wrap {
            w.entry("A", format!("{:.9e}", k.second_moment));
            w.entry("B", format!("{:.9e}", k.mean_slope));
            w.entry("k", format!("{:.9e}", k.kappa));
            w.entry("q1", format!("{:.9e}", k.q1));
            w.entry("q2", format!("{:.9e}", k.q2));
        }
        w.finish()
    }

    /// Parse the key-value format. Wrapping constants are re-solved when absent.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let family: PsiFamily = kv.require::<String>("family")?.parse()?;
        let b = kv.take::<f64>("b")?;
        let c = kv.take::<f64>("c")?;
        let alpha = kv.take::<f64>("alpha")?;
        let derived = (
            kv.take::<f64>("A")?,
            kv.take::<f64>("B")?,
            kv.take::<f64>("k")?,
            kv.take::<f64>("q1")?,
            kv.take::<f64>("q2")?,
        );
        kv.finish()?;
        match (family, derived) {
            (PsiFamily::Wrapping, (Some(a), Some(bb), Some(k), Some(q1), Some(q2))) => {
                let b = b.ok_or_else(|| Error::Config("wrapping requires 'b'".into()))?;
                let c = c.ok_or_else(|| Error::Config("wrapping requires 'c'".into()))?;
                Self::wrapping_with_constants(
                    b,
                    c,
                    WrapConstants {
                        second_moment: a,
                        mean_slope: bb,
                        kappa: k,
                        q1,
                        q2,
                    },
                )
            }
            (_, (None, None, None, None, None)) => Self::build(family, b, c, alpha),
            _ => Err(Error::Config(
                "derived constants must be given all together and only for wrapping".into(),
            )),
        }
    }
}

fn check_corners(b: f64, c: f64) -> Result<()> {
    if !(b.is_finite() && c.is_finite() && b > 0.0 && b < c) {
        return Err(Error::Config(format!(
            "wrapping requires 0 < b < c < ∞, got b={}, c={}",
            b, c
        )));
    }
    Ok(())
}

/// Gaussian moments `(A, B)` of the wrapping shape with the given `q1, q2`.
fn wrap_moments(b: f64, c: f64, q1: f64, q2: f64, quad: &Quadrature) -> (f64, f64) {
    // core: ∫_{-b}^{b} z² dΦ = (2Φ(b) − 1) − 2bφ(b)
    let core_mass = 2.0 * norm_cdf(b) - 1.0;
    let core_second = core_mass - 2.0 * b * norm_pdf(b);
    let tail_second = quad
        .integrate(|z| (q1 * (q2 * (c - z)).tanh()).powi(2) * norm_pdf(z), b, c)
        .value;
    let tail_slope = quad
        .integrate(
            |z| {
                let t = (q2 * (c - z)).tanh();
                q1 * q2 * (1.0 - t * t) * norm_pdf(z)
            },
            b,
            c,
        )
        .value;
    (
        core_second + 2.0 * tail_second,
        core_mass - 2.0 * tail_slope,
    )
}

/// Solve `(A, B, k, q1, q2)` for the wrapping function with corner `b` and
/// rejection point `c`.
///
/// The iteration runs on `(A, B)`. For fixed `(A, B)` the ratio
/// `q1/q2 = 2A/B` is fixed, so continuity at `b` pins down `q2` by a
/// monotone scalar root; `A` and `B` are then recomputed by quadrature.
/// `k` follows from `q1·q2 = B(k − 1)/2`.
pub fn solve_wrapping_constants(b: f64, c: f64, tol: f64) -> Result<PsiSpec> {
    check_corners(b, c)?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!(
            "solver tolerance must be positive, got {}",
            tol
        )));
    }
    let quad = Quadrature::with_tol(1e-13);
    // start from the Huber function with the same corner
    let mut a = 2.0 * norm_cdf(b) - 1.0 - 2.0 * b * norm_pdf(b) + 2.0 * b * b * (1.0 - norm_cdf(b));
    let mut slope = 2.0 * norm_cdf(b) - 1.0;
    let mut q = (f64::NAN, f64::NAN);
    let mut step = f64::INFINITY;
    for _ in 0..500 {
        if !(a > 0.0 && slope > 0.0) {
            break;
        }
        let ratio = 2.0 * a / slope;
        let gap = |q2: f64| ratio * q2 * (q2 * (c - b)).tanh() - b;
        let mut hi = 1.0;
        while gap(hi) < 0.0 && hi < 1e8 {
            hi *= 2.0;
        }
        let Some(q2) = brent(gap, 0.0, hi, 1e-15, 300) else {
            break;
        };
        q = (ratio * q2, q2);
        let (a_next, slope_next) = wrap_moments(b, c, q.0, q.1, &quad);
        step = (a_next - a).abs() + (slope_next - slope).abs();
        a = a_next;
        slope = slope_next;
        if step < tol * 1e-3 {
            break;
        }
    }
    let (q1, q2) = q;
    let kappa = 1.0 + 2.0 * q1 * q2 / slope;
    let continuity = (q1 * (q2 * (c - b)).tanh() - b).abs();
    let (a_check, slope_check) = if q1.is_finite() {
        wrap_moments(b, c, q1, q2, &quad)
    } else {
        (f64::NAN, f64::NAN)
    };
    let residual = continuity
        .max((a_check - a).abs())
        .max((slope_check - slope).abs())
        .max(step);
    if !(residual < tol) || !(kappa > 1.0) {
        return Err(Error::SolverFailure {
            message: format!(
                "wrapping constants for b={}, c={} did not converge (A={:.6}, B={:.6}, k={:.6}, continuity gap {:.2e})",
                b, c, a, slope, kappa, continuity
            ),
            residual: if residual.is_nan() { f64::INFINITY } else { residual },
        });
    }
    Ok(PsiSpec {
        family: PsiFamily::Wrapping,
        b,
        c,
        alpha: f64::NAN,
        wrap: Some(WrapConstants {
            second_moment: a,
            mean_slope: slope,
            kappa,
            q1,
            q2,
        }),
    })
}
