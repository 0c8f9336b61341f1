use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Robust correlation toolkit: transformed product moments, theory,
/// distance correlation, cellwise outliers, robust PCA and simulations.
#[derive(Debug, Parser)]
#[command(name = "robcor", version, propagate_version = true)]
pub struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transformed correlation matrix, covariance and Mahalanobis distances.
    Corr(CorrArgs),
    /// Robustness properties of a transform and its maxbias curve.
    Theory(TheoryArgs),
    /// Distance correlation between two data sets.
    Dcor(DcorArgs),
    /// Detect deviating cells through correlated neighbor columns.
    Ddc(DdcArgs),
    /// Robust principal components with scores and residual masks.
    Rpca(RpcaArgs),
    /// Monte Carlo bias and MSE of correlation estimators.
    Sim(SimArgs),
    /// Time classical against transformed correlation matrices.
    Bench(BenchArgs),
}

/// Transform selection shared by the sub-commands.
#[derive(Debug, Clone, Args)]
pub struct TransformArgs {
    /// Transform family: wrapping, huber, sigmoid, sign, identity (none),
    /// spearman, quadrant, normal-scores, tns.
    #[arg(long, default_value = "wrapping")]
    pub transform: String,

    /// Huber corner or wrapping identity limit.
    #[arg(long)]
    pub b: Option<f64>,

    /// Wrapping rejection point.
    #[arg(long)]
    pub c: Option<f64>,

    /// Trimming fraction of truncated normal scores.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Read the transform from a key-value file (overrides the flags above).
    #[arg(long, value_name = "FILE")]
    pub psi_config: Option<PathBuf>,

    /// Write the transform, with solved constants, to a key-value file.
    #[arg(long, value_name = "FILE")]
    pub save_psi: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    /// Input CSV with a header row; empty or NA cells are missing.
    #[arg(long)]
    pub input: PathBuf,

    /// Correlation matrix output.
    #[arg(long)]
    pub output: PathBuf,

    /// Covariance matrix output.
    #[arg(long)]
    pub covariance: Option<PathBuf>,

    /// Robust Mahalanobis distances and flags output.
    #[arg(long)]
    pub distances: Option<PathBuf>,

    /// Quantile of the chi-square cutoff for row flags.
    #[arg(long, default_value_t = 0.975)]
    pub p: f64,

    /// Floating-point precision of the computation.
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,

    #[command(flatten)]
    pub transform: TransformArgs,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[command(flatten)]
    pub transform: TransformArgs,

    /// Property row for the selected transform.
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Report every standard transform instead of the selected one.
    #[arg(long, requires = "report")]
    pub all: bool,

    /// Write the maxbias curve instead of the property row.
    #[arg(long, requires = "out")]
    pub bias_curve: bool,

    /// Largest contamination fraction of the curve.
    #[arg(long, default_value_t = 0.3)]
    pub eps_max: f64,

    /// Number of grid steps of the curve.
    #[arg(long, default_value_t = 60)]
    pub eps_steps: usize,

    /// True correlation of the model.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub rho: f64,

    /// Bias curve output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DcorArgs {
    /// First data set (rows are observations).
    #[arg(long)]
    pub x: PathBuf,

    /// Second data set with the same number of rows.
    #[arg(long)]
    pub y: PathBuf,

    /// Median/MAD standardization and tanh before the distances.
    #[arg(long)]
    pub robust: bool,

    /// Number of permutations for the p-value (at least 99).
    #[arg(long)]
    pub perm: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DdcArgs {
    #[arg(long)]
    pub input: PathBuf,

    /// Neighbors per column.
    #[arg(long, default_value_t = 10)]
    pub k: usize,

    /// Search dimension: auto, full, or a count.
    #[arg(long, default_value = "auto")]
    pub q: String,

    /// Smallest absolute correlation a neighbor needs to take part.
    #[arg(long, default_value_t = 0.5)]
    pub min_cor: f64,

    /// Quantile of the chi-square cutoff for cells.
    #[arg(long, default_value_t = 0.99)]
    pub p: f64,

    /// Neighbor search: exact, approx or brute.
    #[arg(long, default_value = "exact")]
    pub backend: String,

    /// Flagged-cells CSV output.
    #[arg(long)]
    pub flags: Option<PathBuf>,

    /// Cellmap image output (binary PPM).
    #[arg(long)]
    pub cellmap: Option<PathBuf>,

    /// Show only the columns with the most flagged cells.
    #[arg(long, value_name = "M")]
    pub top: Option<usize>,

    /// Pixels per cell in the cellmap.
    #[arg(long, default_value_t = 4)]
    pub block: usize,

    #[command(flatten)]
    pub transform: TransformArgs,
}

#[derive(Debug, Args)]
pub struct RpcaArgs {
    #[arg(long)]
    pub input: PathBuf,

    /// Number of components.
    #[arg(long, default_value_t = 3)]
    pub k: usize,

    /// Scores output.
    #[arg(long)]
    pub scores: Option<PathBuf>,

    /// Residual mask output (0/1 per cell).
    #[arg(long)]
    pub mask: Option<PathBuf>,

    /// Residual mask image output (binary PPM).
    #[arg(long)]
    pub mask_image: Option<PathBuf>,

    /// Loadings output.
    #[arg(long)]
    pub loadings: Option<PathBuf>,

    /// Quantile of the chi-square cutoff for the mask.
    #[arg(long, default_value_t = 0.99)]
    pub p: f64,

    /// Pixels per cell in the mask image.
    #[arg(long, default_value_t = 4)]
    pub block: usize,

    #[command(flatten)]
    pub transform: TransformArgs,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Scenario key-value file; flags below override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Contamination: none, rowwise or cellwise.
    #[arg(long)]
    pub kind: Option<String>,

    /// Contamination fraction.
    #[arg(long)]
    pub eps: Option<f64>,

    /// Outlier position.
    #[arg(long = "outlier-k", value_name = "K", allow_hyphen_values = true)]
    pub outlier_k: Option<f64>,

    /// Replications per grid point.
    #[arg(long)]
    pub m: Option<usize>,

    /// Sample size.
    #[arg(long)]
    pub n: Option<usize>,

    /// Comma-separated correlation grid.
    #[arg(long)]
    pub rho: Option<String>,

    /// Comma-separated estimators, e.g. pearson,huber:1.5,wrapping:1.5:4.
    #[arg(long)]
    pub estimators: Option<String>,

    /// Result table output.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Observations.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    /// Comma-separated variable counts.
    #[arg(long, default_value = "100,200,500")]
    pub d: String,

    /// Timing repeats; the fastest is kept.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,

    /// Estimators to time against Pearson.
    #[arg(long, default_value = "wrapping:1.5:4")]
    pub estimators: String,

    /// Timing table output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
