//! Robust correlation by marginal transformation.
//!
//! Every variable is standardized with a robust location and scale, passed
//! through a bounded odd function ψ (by default the *wrapping* function), and
//! the ordinary product-moment machinery is applied to the result. This keeps
//! the three properties that make product moments attractive in high
//! dimensions: covariance matrices are positive semidefinite, independent
//! variables have zero covariance, and the cost is a single `O(nd)` pass plus
//! one matrix multiply.
//!
//! The crate is organized by task:
//!
//! * [`psi`] transform families and the wrapping-constant solver,
//! * [`univariate`] robust per-column location/scale and column transforms,
//! * [`moments`] transformed correlation, PSD scatter matrices, Mahalanobis distances,
//! * [`theory`] influence functions, efficiency, maxbias and breakdown,
//! * [`distcor`] distance correlation and its robust variant,
//! * [`fastddc`] fast detection of deviating cells,
//! * [`rpca`] robust PCA by truncated SVD of wrapped data,
//! * [`sim`] Monte Carlo bias/MSE study and timing benchmark.
//!
//! Data-path code is generic over [`Scalar`] (`f32` or `f64`); the theory
//! and simulation modules work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod distcor;
pub mod error;
pub mod fastddc;
pub mod knn;
pub mod linalg;
pub mod moments;
pub mod ppm;
pub mod psi;
pub mod quad;
pub mod rpca;
pub mod scalar;
pub mod sim;
pub mod special;
pub mod theory;
pub mod univariate;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use data::DataMatrix;
pub use distcor::DCorResult;
pub use fastddc::{CellFlagReport, DdcOptions};
pub use moments::ScatterModel;
pub use psi::{PsiFamily, PsiSpec};
pub use rpca::RobustPcaModel;
pub use theory::{BiasCurve, TheoryReport};
pub use univariate::ColumnModel;

/// Double-precision data matrix.
pub type DataMatrix64 = DataMatrix<f64>;
/// Single-precision data matrix.
pub type DataMatrix32 = DataMatrix<f32>;
/// Double-precision scatter model.
pub type ScatterModel64 = ScatterModel<f64>;
/// Single-precision scatter model.
pub type ScatterModel32 = ScatterModel<f32>;
/// Double-precision column model.
pub type ColumnModel64 = ColumnModel<f64>;
/// Single-precision column model.
pub type ColumnModel32 = ColumnModel<f32>;
/// Double-precision cell flag report.
pub type CellFlagReport64 = CellFlagReport<f64>;
/// Double-precision robust PCA model.
pub type RobustPcaModel64 = RobustPcaModel<f64>;
