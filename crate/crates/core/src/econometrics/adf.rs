//! Augmented Dickey-Fuller test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::critical::{critical_value, CriticalTable, SignificanceLevel};
use super::ols::{ols, Design, SeMode};
use super::EstimationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deterministic {
    None,
    #[default]
    Constant,
    ConstantTrend,
}

impl Deterministic {
    fn table(self) -> CriticalTable {
        match self {
            Self::None => CriticalTable::AdfNone,
            Self::Constant => CriticalTable::AdfConstant,
            Self::ConstantTrend => CriticalTable::AdfConstantTrend,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagSpec {
    Fixed(usize),
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lags_used: usize,
    pub n_obs: usize,
    pub deterministic: Deterministic,
    pub table: CriticalTable,
    pub critical_values: BTreeMap<SignificanceLevel, f64>,
    pub reject_unit_root: BTreeMap<SignificanceLevel, bool>,
}

impl AdfResult {
    pub fn rejects(&self, level: SignificanceLevel) -> bool {
        self.reject_unit_root[&level]
    }
}

pub fn adf_test(
    series: &[f64],
    lags: LagSpec,
    deterministic: Deterministic,
) -> Result<AdfResult, EstimationError> {
    adf_with_table(series, lags, deterministic, deterministic.table())
}

/// Schwert's rule ⌊12 (n/100)^{1/4}⌋.
fn max_auto_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

pub(crate) fn adf_with_table(
    series: &[f64],
    lags: LagSpec,
    deterministic: Deterministic,
    table: CriticalTable,
) -> Result<AdfResult, EstimationError> {
    let n = series.len();
    if series.iter().any(|v| !v.is_finite()) {
        return Err(EstimationError::NonFinite);
    }
    if n > 0 && series.iter().all(|&v| v == series[0]) {
        return Err(EstimationError::Degenerate("constant series".into()));
    }
    let chosen = match lags {
        LagSpec::Fixed(k) => {
            if n <= k + 10 {
                return Err(EstimationError::InsufficientData { needed: k + 11, got: n });
            }
            k
        }
        LagSpec::Auto => {
            if n <= 11 {
                return Err(EstimationError::InsufficientData { needed: 12, got: n });
            }
            // Keep at least ten residual degrees of freedom at the largest lag.
            let det = deterministic_count(deterministic);
            let mut maxlag = max_auto_lag(n);
            while maxlag > 0 && n - 1 - maxlag < maxlag + 1 + det + 10 {
                maxlag -= 1;
            }
            let start = maxlag + 1;
            let mut best: Option<(f64, usize)> = None;
            for k in 0..=maxlag {
                let (y, d) = adf_regression(series, k, start, deterministic);
                let fit = ols(&y, &d, SeMode::Classical)?;
                let m = y.len() as f64;
                let bic = m * (fit.ssr / m).ln() + d.n_cols() as f64 * m.ln();
                if best.is_none_or(|(b, _)| bic < b) {
                    best = Some((bic, k));
                }
            }
            best.expect("at least lag 0").1
        }
    };
    let (y, d) = adf_regression(series, chosen, chosen + 1, deterministic);
    let fit = ols(&y, &d, SeMode::Classical)?;
    let statistic = fit.coefficients[0] / fit.standard_errors[0];
    let n_obs = y.len();
    let mut critical_values = BTreeMap::new();
    let mut reject_unit_root = BTreeMap::new();
    for level in SignificanceLevel::ALL {
        let cv = critical_value(table, level, n_obs);
        critical_values.insert(level, cv);
        reject_unit_root.insert(level, statistic < cv);
    }
    Ok(AdfResult {
        statistic,
        lags_used: chosen,
        n_obs,
        deterministic,
        table,
        critical_values,
        reject_unit_root,
    })
}

fn deterministic_count(d: Deterministic) -> usize {
    match d {
        Deterministic::None => 0,
        Deterministic::Constant => 1,
        Deterministic::ConstantTrend => 2,
    }
}

/// Δy_t on y_{t-1}, deterministics and Δy_{t-1..t-k} for t in start..n.
fn adf_regression(
    series: &[f64],
    k: usize,
    start: usize,
    deterministic: Deterministic,
) -> (Vec<f64>, Design) {
    let n = series.len();
    let rows = start..n;
    let m = n - start;
    let dy = |t: usize| series[t] - series[t - 1];
    let y: Vec<f64> = rows.clone().map(dy).collect();
    let mut d = Design::new();
    d.push("level_lag1", rows.clone().map(|t| series[t - 1]).collect());
    if deterministic != Deterministic::None {
        d.push("constant", vec![1.0; m]);
    }
    if deterministic == Deterministic::ConstantTrend {
        d.push("trend", rows.clone().map(|t| t as f64).collect());
    }
    for i in 1..=k {
        d.push(format!("diff_lag{i}"), rows.clone().map(|t| dy(t - i)).collect());
    }
    (y, d)
}
