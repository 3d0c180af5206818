//! Weekly re-estimation and the RQV panel.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::gains::{CostBasis, GainTracker};
use crate::econometrics::{engle_granger, estimate_vecm, EgOptions, LagSpec, SeMode, SignificanceLevel};
use crate::impulse::{relative_quote_values, simulate_impulse, Horizon, ImpulseConfig};
use crate::ingest::TradeRecord;
use crate::microstructure::window_volatility;
use crate::quotegrid::{slice_weeks, AlignedPair, GridError, QuoteBar, Side, WeekWindow, DEFAULT_MIN_WEEK_ROWS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PanelError {
    #[error("every week failed estimation: {}", summarize(.0))]
    AllWeeksFailed(Vec<(usize, String)>),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid panel configuration: {0}")]
    Config(String),
}

fn summarize(v: &[(usize, String)]) -> String {
    let shown: Vec<String> = v.iter().take(5).map(|(w, m)| format!("week {w}: {m}")).collect();
    let more = v.len().saturating_sub(5);
    if more > 0 {
        format!("{} (and {more} more)", shown.join("; "))
    } else {
        shown.join("; ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainTiming {
    #[default]
    WeekEnd,
    WeekStart,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelConfig {
    pub p: usize,
    pub impulse: ImpulseConfig,
    pub horizons: Vec<Horizon>,
    pub anchor: DateTime<Utc>,
    pub min_rows: usize,
    /// Worker threads; None uses every logical core.
    pub workers: Option<usize>,
    pub se_mode: SeMode,
    pub gain_basis: CostBasis,
    pub gain_timing: GainTiming,
    /// Run the level unit-root check before each weekly fit.
    pub unit_root_precheck: bool,
    /// Asset filter for trades; None keeps the pair's asset.
    pub asset: Option<String>,
}

impl PanelConfig {
    pub fn new(anchor: DateTime<Utc>) -> Self {
        Self {
            p: 3,
            impulse: ImpulseConfig::default(),
            horizons: Horizon::defaults(),
            anchor,
            min_rows: DEFAULT_MIN_WEEK_ROWS,
            workers: None,
            se_mode: SeMode::Classical,
            gain_basis: CostBasis::AverageCost,
            gain_timing: GainTiming::WeekEnd,
            unit_root_precheck: false,
            asset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeeklyPanelRow {
    pub week_index: usize,
    pub week_start: DateTime<Utc>,
    pub side: Side,
    pub rows: usize,
    pub rows_used: usize,
    pub partial: bool,
    pub rqv: BTreeMap<Horizon, f64>,
    pub weekly_return: Option<f64>,
    pub ln_traded_value: Option<f64>,
    pub weekly_volatility: Option<f64>,
    pub pct_accounts_in_gain: Option<f64>,
    pub estimation_ok: bool,
    pub cointegrated_5pct: Option<bool>,
    pub alpha_local: Option<f64>,
    pub diagnostics: Vec<String>,
}

/// Week-level regressors shared by both sides.
#[derive(Debug, Clone, Default)]
struct WeekFacts {
    weekly_return: Option<f64>,
    ln_traded_value: Option<f64>,
    weekly_volatility: Option<f64>,
    pct: Option<f64>,
    notes: Vec<String>,
}

fn week_facts(local: &[QuoteBar]) -> WeekFacts {
    let mut f = WeekFacts::default();
    if let (Some(first), Some(last)) = (local.first(), local.last()) {
        f.weekly_return = Some(last.mid_close / first.mid_close - 1.0);
        let tv: f64 = local.iter().map(|b| b.traded_value).sum();
        if tv > 0.0 {
            f.ln_traded_value = Some(tv.ln());
        } else {
            f.notes.push("no traded value".into());
        }
        match window_volatility(local) {
            Ok(v) => f.weekly_volatility = Some(v),
            Err(e) => f.notes.push(format!("volatility: {e}")),
        }
    }
    f
}

struct SideFit {
    rqv: BTreeMap<Horizon, f64>,
    cointegrated_5pct: Option<bool>,
    alpha_local: f64,
}

fn fit_side(pair: &AlignedPair, side: Side, cfg: &PanelConfig) -> Result<SideFit, String> {
    let pa = pair.local_quotes(side);
    let pb = pair.global_quotes(side);
    let opts = EgOptions { force: !cfg.unit_root_precheck, lags: LagSpec::Auto };
    let coint = engle_granger(&pa, &pb, &opts).map_err(|e| format!("cointegration: {e}"))?;
    if let Some(d) = &coint.degenerate {
        return Err(format!("cointegration: degenerate ({d})"));
    }
    let fit = estimate_vecm(pair, side, cfg.p, &coint, cfg.se_mode).map_err(|e| format!("vecm: {e}"))?;
    let path = simulate_impulse(&fit, &cfg.impulse).map_err(|e| format!("impulse: {e}"))?;
    let rqv = relative_quote_values(&path, &cfg.horizons).map_err(|e| format!("impulse: {e}"))?;
    Ok(SideFit {
        rqv,
        cointegrated_5pct: coint.residual_adf.as_ref().map(|_| coint.is_cointegrated(SignificanceLevel::Five)),
        alpha_local: fit.local.alpha.value,
    })
}

fn week_rows(pair: &AlignedPair, w: &WeekWindow, facts: &WeekFacts, cfg: &PanelConfig) -> Vec<WeeklyPanelRow> {
    let mut notes = facts.notes.clone();
    let mut used = 0;
    let segment = if !w.usable {
        notes.push(format!("only {} rows (minimum {})", w.row_count(), cfg.min_rows));
        None
    } else {
        match pair.slice(w.rows.clone()) {
            Ok(week) => {
                let seg = week.longest_contiguous();
                if seg.len() < week.len() {
                    notes.push(format!(
                        "gaps inside week; using longest contiguous run of {} of {} rows",
                        seg.len(),
                        week.len()
                    ));
                }
                used = seg.len();
                if seg.len() < cfg.min_rows {
                    notes.push(format!("contiguous run of {} rows below minimum {}", seg.len(), cfg.min_rows));
                    None
                } else {
                    week.slice(seg).ok()
                }
            }
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        }
    };
    Side::BOTH
        .iter()
        .map(|&side| {
            let mut diagnostics = notes.clone();
            let fitted = match &segment {
                Some(seg) => fit_side(seg, side, cfg).map_err(|e| diagnostics.push(e)).ok(),
                None => None,
            };
            WeeklyPanelRow {
                week_index: w.index,
                week_start: w.start,
                side,
                rows: w.row_count(),
                rows_used: used,
                partial: w.partial,
                estimation_ok: fitted.is_some(),
                rqv: fitted.as_ref().map(|f| f.rqv.clone()).unwrap_or_default(),
                cointegrated_5pct: fitted.as_ref().and_then(|f| f.cointegrated_5pct),
                alpha_local: fitted.as_ref().map(|f| f.alpha_local),
                weekly_return: facts.weekly_return,
                ln_traded_value: facts.ln_traded_value,
                weekly_volatility: facts.weekly_volatility,
                pct_accounts_in_gain: facts.pct,
                diagnostics,
            }
        })
        .collect()
}

/// One row per week and side, in week order, bid before offer.
pub fn build_weekly_panel(
    pair: &AlignedPair,
    trades: Option<&[TradeRecord]>,
    cfg: &PanelConfig,
) -> Result<Vec<WeeklyPanelRow>, PanelError> {
    if cfg.p == 0 {
        return Err(PanelError::Config("lag order must be at least 1".into()));
    }
    if cfg.horizons.is_empty() {
        return Err(PanelError::Config("no horizons requested".into()));
    }
    cfg.impulse.validate().map_err(|e| PanelError::Config(e.to_string()))?;
    if let Some(max) = cfg.horizons.iter().map(|h| h.bar()).max() {
        if max > cfg.impulse.horizon_bars + 1 {
            return Err(PanelError::Config(format!(
                "horizon needs bar {max} but the impulse runs {} bars",
                cfg.impulse.horizon_bars
            )));
        }
    }
    let windows = slice_weeks(pair, cfg.anchor, cfg.min_rows)?;

    let mut facts: Vec<WeekFacts> = windows.iter().map(|w| week_facts(&pair.local()[w.rows.clone()])).collect();
    if let Some(trades) = trades {
        let asset = cfg.asset.as_deref().unwrap_or(&pair.asset);
        let mut tracker = GainTracker::new(trades, Some(asset), cfg.gain_basis);
        let mut order: Vec<usize> = (0..windows.len()).filter(|&i| !windows[i].rows.is_empty()).collect();
        let pick = |i: usize| {
            let r = &windows[i].rows;
            match cfg.gain_timing {
                GainTiming::WeekEnd => &pair.local()[r.end - 1],
                GainTiming::WeekStart => &pair.local()[r.start],
            }
        };
        order.sort_by_key(|&i| pick(i).timestamp);
        for i in order {
            let bar = pick(i);
            match tracker.pct_at(bar.timestamp, bar.mid_close) {
                Ok(p) => facts[i].pct = Some(p),
                Err(e) => facts[i].notes.push(format!("gain proportion: {e}")),
            }
        }
        if tracker.oversells() > 0 {
            log::warn!("{} sells exceeded holdings and were clamped", tracker.oversells());
        }
    }

    let run = || -> Vec<WeeklyPanelRow> {
        windows
            .par_iter()
            .zip(facts.par_iter())
            .flat_map_iter(|(w, f)| week_rows(pair, w, f, cfg))
            .collect()
    };
    let rows = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| PanelError::Config(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    };

    if !rows.iter().any(|r| r.estimation_ok) {
        let mut failures: Vec<(usize, String)> = rows
            .iter()
            .map(|r| (r.week_index, format!("{}: {}", r.side, r.diagnostics.join("; "))))
            .collect();
        failures.dedup();
        return Err(PanelError::AllWeeksFailed(failures));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quotegrid::grid_step;
    use crate::synth::{gen_cointegrated_pair, SynthSpec};
    use chrono::TimeZone;

    fn anchor() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 11, 22, 0, 0, 0).unwrap()
    }

    #[test]
    fn constant_week_is_flagged_not_dropped() {
        let spec = SynthSpec { n_bars: 336 * 3, seed: 2, ..SynthSpec::default() };
        let ds = gen_cointegrated_pair(&spec).unwrap();
        let (mut local, mut global) = (ds.pair.local().to_vec(), ds.pair.global().to_vec());
        for i in 336..672 {
            local[i] = QuoteBar::flat(local[i].timestamp, 1000.0, 1001.0, 1.0).unwrap();
            global[i] = QuoteBar::flat(global[i].timestamp, 1000.0, 1001.0, 1.0).unwrap();
        }
        let pair = AlignedPair::new("BTC", "L", "G", grid_step(), local, global).unwrap();
        let rows = build_weekly_panel(&pair, None, &PanelConfig::new(anchor())).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows[0].estimation_ok && rows[1].estimation_ok);
        assert!(!rows[2].estimation_ok && !rows[3].estimation_ok);
        assert!(!rows[2].diagnostics.is_empty());
        assert!(rows[4].estimation_ok);
        assert!(rows.iter().all(|r| r.pct_accounts_in_gain.is_none()));
        assert_eq!(rows[0].rqv.len(), 5);
    }

    #[test]
    fn panel_is_deterministic_across_worker_counts() {
        let spec = SynthSpec { n_bars: 336 * 4, seed: 6, ..SynthSpec::default() };
        let ds = gen_cointegrated_pair(&spec).unwrap();
        let mut cfg = PanelConfig::new(anchor());
        cfg.workers = Some(1);
        let a = build_weekly_panel(&ds.pair, None, &cfg).unwrap();
        cfg.workers = Some(3);
        let b = build_weekly_panel(&ds.pair, None, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|r| r.week_index).collect::<Vec<_>>(), vec![0, 0, 1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn all_failed_weeks_is_an_error() {
        let spec = SynthSpec { n_bars: 150, seed: 1, ..SynthSpec::default() };
        let ds = gen_cointegrated_pair(&spec).unwrap();
        match build_weekly_panel(&ds.pair, None, &PanelConfig::new(anchor())) {
            Err(PanelError::AllWeeksFailed(v)) => assert!(v[0].1.contains("only 150 rows")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
