//! Weekly adjustment-speed panel, gain proportions, and the regressions that
//! separate disposition, house-money and symmetric quoting behaviour.

mod classify;
mod gains;
mod panel;
mod regression;

pub use classify::{classify_bias, label_for, BiasLabel, BiasVerdict, ClassifierConfig};
pub use gains::{
    gain_snapshot, pct_accounts_in_gain, AccountPosition, CostBasis, GainError, GainSnapshot, GainTracker,
};
pub use panel::{build_weekly_panel, GainTiming, PanelConfig, PanelError, WeeklyPanelRow};
pub use regression::{
    rqv_regression, usable_rows, Conditioning, RegressionError, RqvRegressionReport, MIN_REGRESSION_ROWS,
};
