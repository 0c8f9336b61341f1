//! Distance correlation, its robust variant, and the permutation test.
//!
//! With `a_ij = ‖x_i − x_j‖` and `A` its double-centered version,
//! `dCov² = n⁻² Σ A_ij B_ij`. Because a double-centered matrix has zero row
//! and column sums, `Σ A_ij B_ij = Σ a_ij B_ij`, so only the row means of the
//! distance matrices need to be stored: time is `O(n²)` and memory `O(n)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::psi::PsiSpec;
use crate::scalar::Scalar;
use crate::univariate::{self, ColumnModel};

/// Largest sample size accepted by the quadratic algorithm.
pub const MAX_N: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DCorResult {
    pub dcor: f64,
    pub dcov: f64,
    pub dvar_x: f64,
    pub dvar_y: f64,
    pub n: usize,
    pub p_value: Option<f64>,
    pub n_perm: Option<usize>,
    pub robust: bool,
}

/// Row-major point cloud.
#[derive(Debug, Clone)]
struct Points {
    n: usize,
    p: usize,
    v: Vec<f64>,
}

impl Points {
    fn from_matrix<T: Scalar>(m: &DataMatrix<T>, what: &str) -> Result<Self> {
        let (n, p) = (m.nrows(), m.ncols());
        if p == 0 {
            return Err(Error::Input(format!("{} has no columns", what)));
        }
        if m.missing_count() > 0 {
            return Err(Error::Input(format!("{} contains missing values", what)));
        }
        let mut v = Vec::with_capacity(n * p);
        for i in 0..n {
            v.extend(m.row(i).into_iter().map(Scalar::as_f64));
        }
        Ok(Self { n, p, v })
    }

    #[inline]
    fn dist(&self, i: usize, j: usize) -> f64 {
        let a = &self.v[i * self.p..(i + 1) * self.p];
        let b = &self.v[j * self.p..(j + 1) * self.p];
        if self.p == 1 {
            return (a[0] - b[0]).abs();
        }
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Row means of the distance matrix and their grand mean.
    fn row_means(&self) -> (Vec<f64>, f64) {
        let n = self.n;
        let means: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| self.dist(i, j)).sum::<f64>() / n as f64)
            .collect();
        let grand = means.iter().sum::<f64>() / n as f64;
        (means, grand)
    }
}

struct Centered {
    pts: Points,
    means: Vec<f64>,
    grand: f64,
}

impl Centered {
    fn new(pts: Points) -> Self {
        let (means, grand) = pts.row_means();
        Self { pts, means, grand }
    }

    #[inline]
    fn centered(&self, i: usize, j: usize) -> f64 {
        self.pts.dist(i, j) - self.means[i] - self.means[j] + self.grand
    }
}

/// `Σ_ij a_ij · B_{π(i)π(j)}`, summed over `i < j` and doubled.
fn cross_sum(a: &Points, b: &Centered, perm: Option<&[usize]>) -> f64 {
    let n = a.n;
    let idx = |i: usize| perm.map_or(i, |p| p[i]);
    // per-row partial sums are reduced in a fixed order so runs are bit-stable
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = idx(i);
            (i + 1..n)
                .map(|j| a.dist(i, j) * b.centered(pi, idx(j)))
                .sum::<f64>()
        })
        .collect();
    2.0 * rows.iter().sum::<f64>()
}

fn validate_pair<T: Scalar>(x: &DataMatrix<T>, y: &DataMatrix<T>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::Input(format!(
            "X has {} rows, Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() < 4 {
        return Err(Error::Input(format!(
            "distance correlation needs n ≥ 4, got {}",
            x.nrows()
        )));
    }
    if x.nrows() > MAX_N {
        return Err(Error::Input(format!(
            "n = {} exceeds the limit {} of the quadratic algorithm",
            x.nrows(),
            MAX_N
        )));
    }
    Ok(())
}

struct Prepared {
    a: Centered,
    b: Centered,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Prepared {
    fn new(x: Points, y: Points) -> Self {
        let a = Centered::new(x);
        let b = Centered::new(y);
        let sxx = cross_sum(&a.pts, &a, None);
        let syy = cross_sum(&b.pts, &b, None);
        let sxy = cross_sum(&a.pts, &b, None);
        Self {
            a,
            b,
            sxx,
            syy,
            sxy,
        }
    }

    fn result(&self, robust: bool) -> DCorResult {
        let n2 = (self.a.pts.n as f64).powi(2);
        let dcov2 = (self.sxy / n2).max(0.0);
        let vx = (self.sxx / n2).max(0.0);
        let vy = (self.syy / n2).max(0.0);
        let dcor = if vx > 0.0 && vy > 0.0 {
            (dcov2 / (vx * vy).sqrt()).sqrt().min(1.0)
        } else {
            0.0
        };
        DCorResult {
            dcor,
            dcov: dcov2.sqrt(),
            dvar_x: vx.sqrt(),
            dvar_y: vy.sqrt(),
            n: self.a.pts.n,
            p_value: None,
            n_perm: None,
            robust,
        }
    }

    fn p_value(&self, n_perm: usize, seed: u64) -> f64 {
        let n = self.a.pts.n;
        let observed = self.sxy;
        // ties with the observed statistic count as exceedances
        let slack = 1e-10 * (self.sxx * self.syy).sqrt();
        let hits: usize = (0..n_perm)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b as u64 + 1);
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                usize::from(cross_sum(&self.a.pts, &self.b, Some(&perm)) >= observed - slack)
            })
            .sum();
        (1 + hits) as f64 / (n_perm + 1) as f64
    }
}

/// Distance correlation of the rows of `x` and `y`.
pub fn dcor<T: Scalar>(x: &DataMatrix<T>, y: &DataMatrix<T>) -> Result<DCorResult> {
    validate_pair(x, y)?;
    Ok(Prepared::new(Points::from_matrix(x, "X")?, Points::from_matrix(y, "Y")?).result(false))
}

/// Median/MAD column models with the sigmoid ψ.
pub fn sigmoid_models<T: Scalar>(x: &DataMatrix<T>) -> Result<Vec<ColumnModel<T>>> {
    let spec = PsiSpec::sigmoid();
    (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let s = univariate::mad_named(col, x.name(j))?;
            let mu = univariate::median(col).expect("mad succeeded so values exist");
            Ok(ColumnModel {
                name: x.name(j).to_string(),
                mu_hat: mu,
                s_hat: s,
                spec,
                n_obs: col.len(),
                n_missing: 0,
            })
        })
        .collect()
}

/// `ψ((x − μ̂)/ŝ)` per coordinate.
pub fn robust_transform<T: Scalar>(
    x: &DataMatrix<T>,
    models: &[ColumnModel<T>],
) -> Result<DataMatrix<T>> {
    if models.len() != x.ncols() {
        return Err(Error::Input(format!(
            "{} models for {} columns",
            models.len(),
            x.ncols()
        )));
    }
    let cols = models
        .iter()
        .enumerate()
        .map(|(j, m)| {
            m.spec.validate()?;
            Ok(m.z_scores(x.column(j))
                .into_iter()
                .map(|z| m.spec.psi(z))
                .collect())
        })
        .collect::<Result<Vec<Vec<T>>>>()?;
    DataMatrix::from_columns(cols)
}

/// Distance correlation after transforming every coordinate with the given
/// models.
pub fn robust_dcor_with<T: Scalar>(
    x: &DataMatrix<T>,
    y: &DataMatrix<T>,
    mx: &[ColumnModel<T>],
    my: &[ColumnModel<T>],
) -> Result<DCorResult> {
    validate_pair(x, y)?;
    let gx = robust_transform(x, mx)?;
    let gy = robust_transform(y, my)?;
    Ok(Prepared::new(
        Points::from_matrix(&gx, "X")?,
        Points::from_matrix(&gy, "Y")?,
    )
    .result(true))
}

/// Robust distance correlation with median/MAD standardization and `tanh`.
pub fn robust_dcor<T: Scalar>(x: &DataMatrix<T>, y: &DataMatrix<T>) -> Result<DCorResult> {
    validate_pair(x, y)?;
    let mx = sigmoid_models(x)?;
    let my = sigmoid_models(y)?;
    robust_dcor_with(x, y, &mx, &my)
}

/// Permutation p-value `(1 + #{T_b ≥ T}) / (n_perm + 1)`, permuting the
/// rows of `y`. Permutation `b` draws from stream `b + 1` of a ChaCha8
/// generator seeded with `seed`.
pub fn dcor_permutation_test<T: Scalar>(
    x: &DataMatrix<T>,
    y: &DataMatrix<T>,
    n_perm: usize,
    seed: u64,
    robust: bool,
) -> Result<DCorResult> {
    validate_pair(x, y)?;
    if n_perm < 99 {
        return Err(Error::Config(format!(
            "at least 99 permutations are required, got {}",
            n_perm
        )));
    }
    let prepared = if robust {
        let gx = robust_transform(x, &sigmoid_models(x)?)?;
        let gy = robust_transform(y, &sigmoid_models(y)?)?;
        Prepared::new(
            Points::from_matrix(&gx, "X")?,
            Points::from_matrix(&gy, "Y")?,
        )
    } else {
        Prepared::new(Points::from_matrix(x, "X")?, Points::from_matrix(y, "Y")?)
    };
    let mut res = prepared.result(robust);
    res.p_value = Some(prepared.p_value(n_perm, seed));
    res.n_perm = Some(n_perm);
    Ok(res)
}
