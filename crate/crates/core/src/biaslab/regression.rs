//! RQV on a conditioning variable, traded value and volatility.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::panel::WeeklyPanelRow;
use crate::econometrics::{ols, CoefficientRow, Design, EstimationError, SeMode};
use crate::impulse::Horizon;
use crate::quotegrid::Side;

pub const MIN_REGRESSION_ROWS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    MarketReturns,
    PctGain,
}

impl Conditioning {
    pub const ALL: [Conditioning; 2] = [Conditioning::MarketReturns, Conditioning::PctGain];

    pub fn as_str(self) -> &'static str {
        match self {
            Conditioning::MarketReturns => "market_returns",
            Conditioning::PctGain => "pct_gain",
        }
    }

    fn regressor(self) -> &'static str {
        match self {
            Conditioning::MarketReturns => "weekly_return",
            Conditioning::PctGain => "pct_accounts_in_gain",
        }
    }

    fn value(self, row: &WeeklyPanelRow) -> Option<f64> {
        match self {
            Conditioning::MarketReturns => row.weekly_return,
            Conditioning::PctGain => row.pct_accounts_in_gain,
        }
    }
}

impl fmt::Display for Conditioning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Conditioning {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "market_returns" | "returns" => Ok(Conditioning::MarketReturns),
            "pct_gain" | "gain" => Ok(Conditioning::PctGain),
            o => Err(format!("unknown conditioning {o:?} (market_returns|pct_gain)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressionError {
    #[error("{usable} usable rows for {side} {horizon} on {conditioning}; need {needed}")]
    InsufficientRows {
        usable: usize,
        needed: usize,
        side: Side,
        horizon: Horizon,
        conditioning: Conditioning,
    },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RqvRegressionReport {
    pub conditioning: Conditioning,
    pub side: Side,
    pub horizon: Horizon,
    /// Slope on the conditioning variable.
    pub slope: CoefficientRow,
    pub ln_traded_value: CoefficientRow,
    pub weekly_volatility: CoefficientRow,
    pub constant: CoefficientRow,
    pub r_squared: f64,
    pub n_obs: usize,
    pub mean_rqv: f64,
    pub se_mode: SeMode,
}

/// Rows that can enter the regression.
pub fn usable_rows<'a>(
    panel: &'a [WeeklyPanelRow],
    conditioning: Conditioning,
    side: Side,
    horizon: Horizon,
) -> Vec<(&'a WeeklyPanelRow, f64, f64)> {
    panel
        .iter()
        .filter(|r| r.side == side && r.estimation_ok)
        .filter(|r| r.ln_traded_value.is_some() && r.weekly_volatility.is_some())
        .filter_map(|r| Some((r, *r.rqv.get(&horizon)?, conditioning.value(r)?)))
        .collect()
}

pub fn rqv_regression(
    panel: &[WeeklyPanelRow],
    conditioning: Conditioning,
    side: Side,
    horizon: Horizon,
) -> Result<RqvRegressionReport, RegressionError> {
    let rows = usable_rows(panel, conditioning, side, horizon);
    if rows.len() < MIN_REGRESSION_ROWS {
        return Err(RegressionError::InsufficientRows {
            usable: rows.len(),
            needed: MIN_REGRESSION_ROWS,
            side,
            horizon,
            conditioning,
        });
    }
    let n = rows.len();
    let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let mut d = Design::with_intercept(n);
    d.push(conditioning.regressor(), rows.iter().map(|r| r.2).collect());
    d.push("ln_traded_value", rows.iter().map(|r| r.0.ln_traded_value.unwrap()).collect());
    d.push("weekly_volatility", rows.iter().map(|r| r.0.weekly_volatility.unwrap()).collect());
    let fit = ols(&y, &d, SeMode::Classical)?;
    Ok(RqvRegressionReport {
        conditioning,
        side,
        horizon,
        slope: fit.row(conditioning.regressor()).unwrap(),
        ln_traded_value: fit.row("ln_traded_value").unwrap(),
        weekly_volatility: fit.row("weekly_volatility").unwrap(),
        constant: fit.row("constant").unwrap(),
        r_squared: fit.r_squared,
        n_obs: n,
        mean_rqv: y.iter().sum::<f64>() / n as f64,
        se_mode: SeMode::Classical,
    })
}
