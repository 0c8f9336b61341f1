//! Monte Carlo bias/MSE study of transformed correlations under rowwise and
//! cellwise contamination, and the correlation-matrix timing benchmark.
//!
//! Replication `r` at grid point `g` draws from stream `(g << 32) | r` of a
//! ChaCha8 generator seeded with the scenario seed, so every estimator sees
//! the same data sets and results do not depend on the thread count.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{KeyValueWriter, KeyValues};
use crate::data::{fmt_full, write_records, DataMatrix};
use crate::error::{Error, Result};
use crate::moments;
use crate::psi::{PsiFamily, PsiSpec};
use crate::special::norm_quantile;
use crate::univariate;

/// Standard deviation of the outlier clusters.
pub const OUTLIER_SD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Contamination {
    None,
    Rowwise,
    Cellwise,
}

impl Contamination {
    pub fn as_str(self) -> &'static str {
        match self {
            Contamination::None => "none",
            Contamination::Rowwise => "rowwise",
            Contamination::Cellwise => "cellwise",
        }
    }
}

impl fmt::Display for Contamination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Contamination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" | "clean" => Ok(Contamination::None),
            "rowwise" => Ok(Contamination::Rowwise),
            "cellwise" => Ok(Contamination::Cellwise),
            other => Err(Error::Config(format!(
                "unknown contamination kind '{}'",
                other
            ))),
        }
    }
}

/// A named correlation estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimator {
    pub name: String,
    pub spec: PsiSpec,
}

fn short(v: f64) -> String {
    format!("{}", (v * 1e4).round() / 1e4)
}

impl Estimator {
    pub fn new(spec: PsiSpec) -> Self {
        let name = match spec.family() {
            PsiFamily::Identity => "pearson".to_string(),
            PsiFamily::RankQuadrant => "quadrant".to_string(),
            PsiFamily::RankSpearman => "spearman".to_string(),
            PsiFamily::RankNormalScores => "normal-scores".to_string(),
            PsiFamily::RankTruncatedNs => format!("tns:{}", short(spec.alpha())),
            PsiFamily::Huber => format!("huber:{}", short(spec.b())),
            PsiFamily::Wrapping => format!("wrapping:{}:{}", short(spec.b()), short(spec.c())),
            f => f.as_str().to_string(),
        };
        Self { name, spec }
    }

    /// The `family[:p1[:p2]]` form with parameters at full precision, which
    /// parses back to the same estimator.
    pub fn to_spec_string(&self) -> String {
        let s = &self.spec;
        match s.family() {
            PsiFamily::RankTruncatedNs => format!("tns:{}", s.alpha()),
            PsiFamily::Huber => format!("huber:{}", s.b()),
            PsiFamily::Wrapping => format!("wrapping:{}:{}", s.b(), s.c()),
            _ => self.name.clone(),
        }
    }

    pub fn estimate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        moments::transformed_correlation(x, y, &self.spec)
    }
}

/// Parses `family[:p1[:p2]]`, e.g. `huber:1.5`, `wrapping:1.3:4`, `tns:0.1`.
impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let family: PsiFamily = parts.next().unwrap_or("").parse()?;
        let params = parts
            .map(|p| {
                p.trim().parse::<f64>().map_err(|_| {
                    Error::Config(format!("bad estimator parameter '{}' in '{}'", p, s))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let allowed = match family {
            PsiFamily::Huber | PsiFamily::RankTruncatedNs => 1,
            PsiFamily::Wrapping => 2,
            _ => 0,
        };
        if params.len() > allowed {
            return Err(Error::Config(format!(
                "too many parameters in estimator '{}'",
                s
            )));
        }
        let p = |i: usize| params.get(i).copied();
        let spec = match family {
            PsiFamily::RankTruncatedNs => PsiSpec::build(family, None, None, p(0))?,
            _ => PsiSpec::build(family, p(0), p(1), None)?,
        };
        Ok(Self::new(spec))
    }
}

/// Pearson and every transform family of the comparison table.
pub fn standard_estimators() -> Result<Vec<Estimator>> {
    Ok(vec![
        Estimator::new(PsiSpec::identity()),
        Estimator::new(PsiSpec::quadrant()),
        Estimator::new(PsiSpec::spearman()),
        Estimator::new(PsiSpec::normal_scores()),
        Estimator::new(PsiSpec::truncated_normal_scores(0.05)?),
        Estimator::new(PsiSpec::truncated_normal_scores(0.1)?),
        Estimator::new(PsiSpec::sigmoid()),
        Estimator::new(PsiSpec::huber(norm_quantile(0.95))?),
        Estimator::new(PsiSpec::huber(norm_quantile(0.9))?),
        Estimator::new(PsiSpec::default_wrapping()),
        Estimator::new(PsiSpec::wrapping(1.3, 4.0)?),
    ])
}

/// `n` draws from the bivariate standard Gaussian with correlation `rho`,
/// built as `X = √(1−|ρ|)U + √|ρ|W`, `Y = √(1−|ρ|)V ± √|ρ|W`.
pub fn gen_clean<R: Rng + ?Sized>(rho: f64, n: usize, rng: &mut R) -> Result<DataMatrix<f64>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Config(format!(
            "rho must lie in (-1, 1), got {}",
            rho
        )));
    }
    let (a, b) = ((1.0 - rho.abs()).sqrt(), rho.abs().sqrt());
    let s = rho.signum();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = StandardNormal.sample(rng);
        let v: f64 = StandardNormal.sample(rng);
        let w: f64 = StandardNormal.sample(rng);
        x.push(a * u + b * w);
        y.push(a * v + s * b * w);
    }
    DataMatrix::from_columns(vec![x, y])
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Config(format!(
            "eps must lie in [0, 1], got {}",
            eps
        )));
    }
    Ok(())
}

/// Replace each row with probability `eps` by a draw from
/// `½ N((k, −k), 0.01² I) + ½ N((−k, k), 0.01² I)`. Returns the number of
/// replaced rows.
pub fn contaminate_rowwise<R: Rng + ?Sized>(
    data: &mut DataMatrix<f64>,
    eps: f64,
    k: f64,
    rng: &mut R,
) -> Result<usize> {
    check_eps(eps)?;
    if data.ncols() != 2 {
        return Err(Error::Input(
            "rowwise contamination expects two columns".into(),
        ));
    }
    let noise = Normal::new(0.0, OUTLIER_SD).expect("positive sd");
    let mut count = 0;
    for i in 0..data.nrows() {
        if rng.random::<f64>() < eps {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            data.set(i, 0, s * k + noise.sample(rng));
            data.set(i, 1, -s * k + noise.sample(rng));
            count += 1;
        }
    }
    Ok(count)
}

/// Replace each cell with probability `eps`: first-column cells by
/// `N(k, 0.01²)`, second-column cells by `N(−k, 0.01²)`. Returns the number
/// of replaced cells.
pub fn contaminate_cellwise<R: Rng + ?Sized>(
    data: &mut DataMatrix<f64>,
    eps: f64,
    k: f64,
    rng: &mut R,
) -> Result<usize> {
    check_eps(eps)?;
    if data.ncols() != 2 {
        return Err(Error::Input(
            "cellwise contamination expects two columns".into(),
        ));
    }
    let noise = Normal::new(0.0, OUTLIER_SD).expect("positive sd");
    let mut count = 0;
    for i in 0..data.nrows() {
        for (j, center) in [(0, k), (1, -k)] {
            if rng.random::<f64>() < eps {
                data.set(i, j, center + noise.sample(rng));
                count += 1;
            }
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub rhos: Vec<f64>,
    pub n: usize,
    pub m: usize,
    pub kind: Contamination,
    pub eps: f64,
    pub k: f64,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
}

impl SimScenario {
    /// Clean data, `ρ ∈ {0, 0.1, …, 0.9}`, `n = 100`, `m = 500`, all
    /// standard estimators.
    pub fn new(kind: Contamination, eps: f64, k: f64) -> Result<Self> {
        Ok(Self {
            rhos: (0..10).map(|i| i as f64 / 10.0).collect(),
            n: 100,
            m: 500,
            kind,
            eps,
            k,
            seed: 0,
            estimators: standard_estimators()?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.rhos.is_empty() {
            return Err(Error::Config("rho grid is empty".into()));
        }
        if let Some(r) = self.rhos.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::Config(format!(
                "rho values must lie in [0, 1), got {}",
                r
            )));
        }
        if !(0.0..0.5).contains(&self.eps) {
            return Err(Error::Config(format!(
                "eps must lie in [0, 0.5), got {}",
                self.eps
            )));
        }
        if !self.k.is_finite() {
            return Err(Error::Config("outlier position k must be finite".into()));
        }
        if self.n < 3 {
            return Err(Error::Config("n must be at least 3".into()));
        }
        if self.m < 2 {
            return Err(Error::Config("m must be at least 2".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators".into()));
        }
        Ok(())
    }

    /// Parse `key = value` lines. Keys: `rho` (comma list), `n`, `m`,
    /// `kind`, `eps`, `k`, `seed`, `estimators` (comma list).
    pub fn from_config(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut s = Self::new(Contamination::None, 0.0, 0.0)?;
        if let Some(r) = kv.take_str("rho") {
            s.rhos = r
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad rho value '{}'", v.trim())))
                })
                .collect::<Result<_>>()?;
        }
        if let Some(v) = kv.take("n")? {
            s.n = v;
        }
        if let Some(v) = kv.take("m")? {
            s.m = v;
        }
        if let Some(v) = kv.take("kind")? {
            s.kind = v;
        }
        if let Some(v) = kv.take("eps")? {
            s.eps = v;
        }
        if let Some(v) = kv.take("k")? {
            s.k = v;
        }
        if let Some(v) = kv.take("seed")? {
            s.seed = v;
        }
        if let Some(list) = kv.take_str("estimators") {
            s.estimators = list.split(',').map(str::parse).collect::<Result<_>>()?;
        }
        kv.finish()?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_config(&self) -> String {
        let rhos: Vec<String> = self.rhos.iter().map(|r| r.to_string()).collect();
        let names: Vec<String> = self
            .estimators
            .iter()
            .map(Estimator::to_spec_string)
            .collect();
        KeyValueWriter::new()
            .entry("rho", rhos.join(","))
            .entry("n", self.n)
            .entry("m", self.m)
            .entry("kind", self.kind)
            .entry("eps", self.eps)
            .entry("k", self.k)
            .entry("seed", self.seed)
            .entry("estimators", names.join(","))
            .finish()
    }

    /// Data set of replication `rep` at grid point `g`.
    pub fn dataset(&self, g: usize, rep: usize) -> Result<DataMatrix<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((g as u64) << 32) | rep as u64);
        let mut data = gen_clean(self.rhos[g], self.n, &mut rng)?;
        match self.kind {
            Contamination::None => {}
            Contamination::Rowwise => {
                contaminate_rowwise(&mut data, self.eps, self.k, &mut rng)?;
            }
            Contamination::Cellwise => {
                contaminate_cellwise(&mut data, self.eps, self.k, &mut rng)?;
            }
        }
        Ok(data)
    }
}

/// One line of the result table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRow {
    pub estimator: String,
    pub rho: f64,
    pub eps: f64,
    pub k: f64,
    pub kind: Contamination,
    pub bias: f64,
    pub mse: f64,
    /// Monte Carlo standard error of `bias`.
    pub bias_se: f64,
    pub m: usize,
    pub seed: u64,
}

/// Bias and MSE of every estimator at every `ρ`.
pub fn run_scenario(s: &SimScenario) -> Result<Vec<SimRow>> {
    s.validate()?;
    let mut rows = Vec::with_capacity(s.rhos.len() * s.estimators.len());
    for (g, &rho) in s.rhos.iter().enumerate() {
        // estimates[rep][estimator], reduced in replication order below
        let estimates = (0..s.m)
            .into_par_iter()
            .map(|rep| {
                let data = s.dataset(g, rep)?;
                s.estimators
                    .iter()
                    .map(|e| e.estimate(data.column(0), data.column(1)))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let m = s.m as f64;
        for (e, est) in s.estimators.iter().enumerate() {
            let dev: Vec<f64> = estimates.iter().map(|r| r[e] - rho).collect();
            let bias = dev.iter().sum::<f64>() / m;
            let mse = dev.iter().map(|v| v * v).sum::<f64>() / m;
            let var = dev.iter().map(|v| (v - bias).powi(2)).sum::<f64>() / (m - 1.0);
            rows.push(SimRow {
                estimator: est.name.clone(),
                rho,
                eps: s.eps,
                k: s.k,
                kind: s.kind,
                bias,
                mse,
                bias_se: (var / m).sqrt(),
                m: s.m,
                seed: s.seed,
            });
        }
    }
    Ok(rows)
}

pub fn write_sim_csv(path: impl AsRef<Path>, comment: Option<&str>, rows: &[SimRow]) -> Result<()> {
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.estimator.clone(),
                r.rho.to_string(),
                r.eps.to_string(),
                r.k.to_string(),
                r.kind.to_string(),
                fmt_full(r.bias),
                fmt_full(r.mse),
                r.m.to_string(),
                r.seed.to_string(),
            ]
        })
        .collect();
    write_records(
        path,
        comment,
        &[
            "estimator",
            "rho",
            "eps",
            "k",
            "kind",
            "bias",
            "mse",
            "m",
            "seed",
        ],
        &records,
    )
}

/// Wall-clock seconds of one benchmark cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub estimator: String,
    pub n: usize,
    pub d: usize,
    pub seconds: f64,
    /// Time relative to the classical correlation matrix at the same size.
    pub ratio: f64,
}

fn best_of<F: FnMut() -> Result<()>>(repeats: usize, mut f: F) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        f()?;
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Gaussian `n × d` benchmark data.
pub fn benchmark_data(n: usize, d: usize, seed: u64) -> DataMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DataMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
}

/// Best-of-`repeats` time of the full correlation matrix for each spec and
/// each `d`. The first spec is the reference for the ratios.
pub fn timing_benchmark(
    n: usize,
    ds: &[usize],
    specs: &[Estimator],
    repeats: usize,
    seed: u64,
) -> Result<Vec<TimingRow>> {
    if specs.is_empty() {
        return Err(Error::Config("no estimators to time".into()));
    }
    let mut rows = Vec::new();
    for &d in ds {
        let x = benchmark_data(n, d, seed);
        let mut reference = f64::NAN;
        for (i, e) in specs.iter().enumerate() {
            let secs = best_of(repeats, || moments::scatter_matrix(&x, &e.spec).map(|_| ()))?;
            if i == 0 {
                reference = secs;
            }
            rows.push(TimingRow {
                estimator: e.name.clone(),
                n,
                d,
                seconds: secs,
                ratio: secs / reference,
            });
        }
    }
    Ok(rows)
}

/// Best-of-`repeats` time of fitting and transforming every column, without
/// the cross product.
pub fn time_transform(x: &DataMatrix<f64>, spec: &PsiSpec, repeats: usize) -> Result<f64> {
    best_of(repeats, || {
        let models = univariate::fit_columns(x, spec)?;
        univariate::transform_matrix(x, &models).map(|_| ())
    })
}

/// Least-squares slope of `log y` on `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
