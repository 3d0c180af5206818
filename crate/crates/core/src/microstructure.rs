//! Spreads, Rogers-Satchell volatility, intraday spread profiles and the
//! spread regression on volume, volatility and half-hour dummies.

use std::io::Write;

use chrono::{DateTime, Utc};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use thiserror::Error;

use crate::econometrics::{ols, CoefficientRow, Design, EstimationError, SeMode};
use crate::quotegrid::{BarSeries, QuoteBar};

pub const SLOTS_PER_DAY: usize = 48;
pub const MIN_REGRESSION_BARS: usize = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MicroError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty input")]
    Empty,
    #[error("need at least {needed} bars with positive traded value, got {got}")]
    InsufficientBars { needed: usize, got: usize },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error("io: {0}")]
    Io(String),
}

/// (offer − bid) / midpoint.
pub fn pct_spread(bar: &QuoteBar) -> Result<f64, MicroError> {
    if !(bar.bid > 0.0 && bar.offer > 0.0) {
        return Err(MicroError::Domain(format!(
            "bid {} and offer {} must be positive",
            bar.bid, bar.offer
        )));
    }
    Ok((bar.offer - bar.bid) / (0.5 * (bar.offer + bar.bid)))
}

/// ln(H/C)·ln(H/O) + ln(L/C)·ln(L/O) on the mid prices.
pub fn rogers_satchell(bar: &QuoteBar) -> Result<f64, MicroError> {
    let (o, h, l, c) = (bar.mid_open, bar.mid_high, bar.mid_low, bar.mid_close);
    if [o, h, l, c].iter().any(|v| !(*v > 0.0)) {
        return Err(MicroError::Domain(format!(
            "mid OHLC must be positive at {}",
            bar.timestamp
        )));
    }
    Ok((h / c).ln() * (h / o).ln() + (l / c).ln() * (l / o).ln())
}

/// sqrt(max(0, Σ per-bar RS variance)).
pub fn window_volatility(bars: &[QuoteBar]) -> Result<f64, MicroError> {
    if bars.is_empty() {
        return Err(MicroError::Empty);
    }
    let mut sum = 0.0;
    for b in bars {
        sum += rogers_satchell(b)?;
    }
    Ok(sum.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpreadObservation {
    pub timestamp: DateTime<Utc>,
    pub pct_spread: f64,
    /// None when the bar traded nothing.
    pub ln_traded_value: Option<f64>,
    pub rs_variance: f64,
    pub half_hour_of_day: usize,
}

pub fn spread_observation(bar: &QuoteBar) -> Result<SpreadObservation, MicroError> {
    Ok(SpreadObservation {
        timestamp: bar.timestamp,
        pct_spread: pct_spread(bar)?,
        ln_traded_value: (bar.traded_value > 0.0).then(|| bar.traded_value.ln()),
        rs_variance: rogers_satchell(bar)?,
        half_hour_of_day: bar.half_hour_of_day(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotStat {
    pub slot: usize,
    pub mean_spread: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntradayProfile {
    /// Present slots only, ascending.
    pub slots: Vec<SlotStat>,
}

impl IntradayProfile {
    pub fn get(&self, slot: usize) -> Option<&SlotStat> {
        self.slots.iter().find(|s| s.slot == slot)
    }

    pub fn peak_slot(&self) -> Option<usize> {
        self.slots
            .iter()
            .max_by(|a, b| a.mean_spread.total_cmp(&b.mean_spread))
            .map(|s| s.slot)
    }

    /// Count-weighted mean over all slots.
    pub fn overall_mean(&self) -> f64 {
        let n: usize = self.slots.iter().map(|s| s.count).sum();
        self.slots.iter().map(|s| s.mean_spread * s.count as f64).sum::<f64>() / n as f64
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), MicroError> {
        let io = |e: csv::Error| MicroError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["slot", "mean_spread", "count"]).map_err(io)?;
        for s in &self.slots {
            w.write_record([s.slot.to_string(), s.mean_spread.to_string(), s.count.to_string()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| MicroError::Io(e.to_string()))
    }
}

pub fn intraday_spread_profile(series: &BarSeries) -> Result<IntradayProfile, MicroError> {
    let mut sum = [0.0; SLOTS_PER_DAY];
    let mut count = [0usize; SLOTS_PER_DAY];
    for bar in series.bars() {
        let s = bar.half_hour_of_day();
        sum[s] += pct_spread(bar)?;
        count[s] += 1;
    }
    if count.iter().all(|&c| c == 0) {
        return Err(MicroError::Empty);
    }
    let slots = (0..SLOTS_PER_DAY)
        .filter(|&s| count[s] > 0)
        .map(|s| SlotStat {
            slot: s,
            mean_spread: sum[s] / count[s] as f64,
            count: count[s],
        })
        .collect();
    Ok(IntradayProfile { slots })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DummyBlock {
    pub included: bool,
    pub baseline_slot: usize,
    pub slots: Vec<usize>,
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub df_numerator: usize,
    pub df_denominator: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadRegressionReport {
    pub ln_trading_value: CoefficientRow,
    /// Per-bar Rogers-Satchell standard deviation.
    pub volatility: CoefficientRow,
    pub constant: CoefficientRow,
    pub r_squared: f64,
    pub n_obs: usize,
    pub zero_volume_excluded: usize,
    pub time_dummies: DummyBlock,
    pub dummy_coefficients: Vec<CoefficientRow>,
    pub volatility_construction: &'static str,
}

/// pct_spread on {constant, ln traded value, per-bar RS volatility, half-hour dummies}.
pub fn spread_regression(series: &BarSeries) -> Result<SpreadRegressionReport, MicroError> {
    let mut obs = Vec::new();
    let mut excluded = 0;
    for bar in series.bars() {
        let o = spread_observation(bar)?;
        if o.ln_traded_value.is_some() {
            obs.push(o);
        } else {
            excluded += 1;
        }
    }
    if obs.len() < MIN_REGRESSION_BARS {
        return Err(MicroError::InsufficientBars {
            needed: MIN_REGRESSION_BARS,
            got: obs.len(),
        });
    }
    let n = obs.len();
    let y: Vec<f64> = obs.iter().map(|o| o.pct_spread).collect();
    let mut base = Design::with_intercept(n);
    base.push("ln_trading_value", obs.iter().map(|o| o.ln_traded_value.unwrap()).collect());
    base.push("volatility", obs.iter().map(|o| o.rs_variance.max(0.0).sqrt()).collect());

    let mut present = [false; SLOTS_PER_DAY];
    for o in &obs {
        present[o.half_hour_of_day] = true;
    }
    let present: Vec<usize> = (0..SLOTS_PER_DAY).filter(|&s| present[s]).collect();
    let baseline = present[0];
    let dummy_slots: Vec<usize> = present[1..].to_vec();
    let mut full = base.clone();
    for &s in &dummy_slots {
        full.push(
            format!("slot_{s:02}"),
            obs.iter().map(|o| f64::from(u8::from(o.half_hour_of_day == s))).collect(),
        );
    }
    let fit = ols(&y, &full, SeMode::Classical)?;
    let block = if dummy_slots.is_empty() {
        DummyBlock {
            included: false,
            baseline_slot: baseline,
            slots: vec![],
            f_statistic: f64::NAN,
            f_p_value: f64::NAN,
            df_numerator: 0,
            df_denominator: fit.dof,
        }
    } else {
        let restricted = ols(&y, &base, SeMode::Classical)?;
        let q = dummy_slots.len();
        let f = ((restricted.ssr - fit.ssr) / q as f64) / (fit.ssr / fit.dof as f64);
        let dist = FisherSnedecor::new(q as f64, fit.dof as f64).expect("positive dof");
        DummyBlock {
            included: true,
            baseline_slot: baseline,
            slots: dummy_slots.clone(),
            f_statistic: f,
            f_p_value: 1.0 - dist.cdf(f.max(0.0)),
            df_numerator: q,
            df_denominator: fit.dof,
        }
    };
    Ok(SpreadRegressionReport {
        ln_trading_value: fit.row("ln_trading_value").unwrap(),
        volatility: fit.row("volatility").unwrap(),
        constant: fit.row("constant").unwrap(),
        r_squared: fit.r_squared,
        n_obs: n,
        zero_volume_excluded: excluded,
        time_dummies: block,
        dummy_coefficients: dummy_slots
            .iter()
            .filter_map(|s| fit.row(&format!("slot_{s:02}")))
            .collect(),
        volatility_construction: "per-bar Rogers-Satchell standard deviation",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ts(day: u32, h: u32, m: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2021, 3, day, h, m, 0).unwrap()
    }

    fn bar(o: f64, h: f64, l: f64, c: f64) -> QuoteBar {
        QuoteBar::new(ts(1, 0, 30), c * 0.999, c * 1.001, o, h, l, c, 1.0).unwrap()
    }

    #[test]
    fn spread_arithmetic() {
        let b = QuoteBar::flat(ts(1, 0, 30), 99.0, 101.0, 1.0).unwrap();
        assert!((pct_spread(&b).unwrap() - 0.02).abs() < 1e-15);
        let z = QuoteBar::flat(ts(1, 0, 30), 50.0, 50.0, 1.0).unwrap();
        assert_eq!(pct_spread(&z).unwrap(), 0.0);
        let mut bad = b;
        bad.bid = 0.0;
        assert!(matches!(pct_spread(&bad), Err(MicroError::Domain(_))));
        let s = b.scaled(37.5);
        assert!((pct_spread(&s).unwrap() - pct_spread(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rs_vanishes_on_flat_and_extreme_bars() {
        assert_eq!(rogers_satchell(&bar(10.0, 10.0, 10.0, 10.0)).unwrap(), 0.0);
        assert_eq!(rogers_satchell(&bar(9.0, 12.0, 9.0, 12.0)).unwrap(), 0.0);
        let b = bar(10.0, 12.0, 9.0, 11.0);
        let v = rogers_satchell(&b).unwrap();
        let expected = (12f64 / 11.0).ln() * (12f64 / 10.0).ln() + (9f64 / 11.0).ln() * (9f64 / 10.0).ln();
        assert_eq!(v, expected);
        assert!((rogers_satchell(&b.scaled(1e4)).unwrap() - v).abs() < 1e-15);
        let mut bad = b;
        bad.mid_low = -1.0;
        assert!(rogers_satchell(&bad).is_err());
    }

    #[test]
    fn window_volatility_cases() {
        assert!(matches!(window_volatility(&[]), Err(MicroError::Empty)));
        let flat = vec![bar(5.0, 5.0, 5.0, 5.0); 7];
        assert_eq!(window_volatility(&flat).unwrap(), 0.0);
        let b = bar(10.0, 12.0, 9.0, 11.0);
        assert_eq!(window_volatility(&[b]).unwrap(), rogers_satchell(&b).unwrap().sqrt());
        let a = [b, bar(10.0, 10.5, 9.5, 10.2)];
        let both = window_volatility(&a).unwrap().powi(2);
        assert!(both >= window_volatility(&a[..1]).unwrap().powi(2));
        assert!(both >= window_volatility(&a[1..]).unwrap().powi(2));
    }

    fn series(spreads: &[(u32, u32, u32, f64)]) -> BarSeries {
        let bars = spreads
            .iter()
            .map(|&(d, h, m, s)| QuoteBar::flat(ts(d, h, m), 100.0 * (1.0 - s / 2.0), 100.0 * (1.0 + s / 2.0), 1.0).unwrap())
            .collect();
        BarSeries::from_bars("BTC", "X", crate::quotegrid::grid_step(), bars).unwrap()
    }

    #[test]
    fn profile_means_and_absent_slots() {
        let s = series(&[(1, 5, 30, 0.01), (2, 1, 0, 0.005), (2, 5, 30, 0.03)]);
        let p = intraday_spread_profile(&s).unwrap();
        assert_eq!(p.slots.len(), 2);
        let s10 = p.get(10).unwrap();
        assert!((s10.mean_spread - 0.02).abs() < 1e-12);
        assert_eq!(s10.count, 2);
        assert!(p.get(1).is_some());
        assert!(p.get(0).is_none());
        assert_eq!(p.peak_slot(), Some(10));
        assert!((p.overall_mean() - (0.01 + 0.03 + 0.005) / 3.0).abs() < 1e-12);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("slot,mean_spread,count\n1,"));
    }

    #[test]
    fn constant_profile_covers_every_slot() {
        let rows: Vec<(u32, u32, u32, f64)> = (0..48u32).map(|i| (3, i / 2, (i % 2) * 30, 0.01)).collect();
        let p = intraday_spread_profile(&series(&rows)).unwrap();
        assert_eq!(p.slots.len(), 48);
        assert!(p.slots.iter().all(|s| (s.mean_spread - 0.01).abs() < 1e-12));
    }

    #[test]
    fn regression_needs_enough_bars_and_variation() {
        let rows: Vec<(u32, u32, u32, f64)> = (0..48u32).map(|i| (3, i / 2, (i % 2) * 30, 0.01)).collect();
        assert!(matches!(
            spread_regression(&series(&rows)),
            Err(MicroError::InsufficientBars { .. })
        ));
        let many: Vec<(u32, u32, u32, f64)> = (0..600u32)
            .map(|i| (1 + (i + 1) / 48, ((i + 1) % 48) / 2, ((i + 1) % 2) * 30, 0.01))
            .collect();
        let many_series = series(&many);
        let err = spread_regression(&many_series).unwrap_err();
        assert!(matches!(
            err,
            MicroError::Estimation(EstimationError::ZeroVarianceRegressand)
        ), "{err:?}");
    }
}
