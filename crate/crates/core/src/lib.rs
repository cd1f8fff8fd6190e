//! Fréchet regression for probability-density responses under the
//! Wasserstein-2 geometry.
//!
//! Distributions are represented by their quantile functions sampled on a
//! shared grid over [0,1], which turns Wasserstein-2 distances into weighted
//! L² distances and makes the regression fit a constrained least-squares
//! problem. On top of the fit the crate provides global and partial
//! Wasserstein F-tests (chi-square mixture, Satterthwaite and residual
//! transport bootstrap calibrations), two kinds of simultaneous confidence
//! bands, and a seeded simulation harness for size/power and coverage
//! experiments.
//!
//! # Layout
//!
//! - [`grid`] — evaluation grid and trapezoid quadrature
//! - [`curve`] — quantile/density curve types, Wasserstein distance, inversion
//! - [`isotonic`] — weighted monotone projection (PAVA, with bounds)
//! - [`dataset`], [`design`], [`fit`] — data model and the regression fit
//! - [`kernels`], [`engines`], [`inference`] — covariance kernels, critical
//!   values, and the F-tests
//! - [`bands`] — Wasserstein-∞ and density confidence bands
//! - [`sim`] — data generators and experiment runners

pub mod bands;
pub mod curve;
pub mod dataset;
pub mod design;
pub mod engines;
pub mod fit;
pub mod gaussian;
pub mod grid;
pub mod inference;
pub mod isotonic;
pub mod kernels;
pub mod sim;

pub use curve::{
    density_from_quantile_density, wasserstein2_distance, wasserstein2_squared,
    wasserstein_inf_distance, DensityCurve, QuantileCurve, QuantileDensityCurve,
};
pub use dataset::Dataset;
pub use design::DesignSummary;
pub use fit::{fit_density, fit_quantile, wasserstein_r_squared, FitResult};
pub use grid::{trapezoid_inner_product, TimeGrid};
pub use inference::{
    global_statistic, partial_statistic, test_global, test_partial, Method, TestKind, TestOptions,
    TestReport,
};
pub use isotonic::monotone_projection;

use thiserror::Error;

/// Errors produced by the regression, inference and band layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("curves live on different grids")]
    GridMismatch,
    #[error("values not nondecreasing at index {index} (drop {violation:.3e})")]
    NonMonotone { index: usize, violation: f64 },
    #[error("weights must be strictly positive (index {0})")]
    NonpositiveWeight(usize),
    #[error("quantile density {value:.3e} below floor {floor:.3e} at index {index}")]
    BelowFloor { index: usize, value: f64, floor: f64 },
    #[error("design problem: {0}")]
    Design(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
    #[error("unsupported method: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
