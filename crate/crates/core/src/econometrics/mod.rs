//! Estimation core: least squares, unit-root tests, Engle-Granger and the bivariate VECM.

mod adf;
mod coint;
mod critical;
mod ols;
mod vecm;

pub use adf::{adf_test, AdfResult, Deterministic, LagSpec};
pub use coint::{engle_granger, CointegrationFit, EgOptions};
pub use critical::{critical_value, CriticalTable, SignificanceLevel};
pub use ols::{ols, two_sided_p, CoefficientRow, Design, OlsFit, SeMode, MAX_CONDITION, RANK_TOLERANCE};
pub use vecm::{
    estimate_vecm, estimate_vecm_levels, select_lag_order_bic, EquationCoefficients, EquationFit,
    Estimate, VecmFit, VecmSystem,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("zero-variance regressand (insufficient variation)")]
    ZeroVarianceRegressand,
    #[error("collinear regressor {column:?} (combination of {with:?})")]
    Collinear { column: String, with: Vec<String> },
    #[error("design condition number {condition:.3e} exceeds limit; suspect columns {columns:?}")]
    IllConditioned { condition: f64, columns: Vec<String> },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{leg} leg rejects a unit root in levels (ADF {statistic:.3}); use force to override")]
    NotIntegrated { leg: String, statistic: f64 },
    #[error("window contains {0} gap(s); split it into contiguous segments first")]
    GapInWindow(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
