use chrono::{DateTime, TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::pair::BUMP_SLOT;
use super::SynthError;
use crate::microstructure::rogers_satchell;
use crate::quotegrid::{grid_step, BarSeries, QuoteBar};

/// Driftless geometric Brownian motion sampled on a fine grid inside each bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmSpec {
    pub seed: u64,
    pub n_bars: usize,
    pub start: DateTime<Utc>,
    pub initial_price: f64,
    /// Standard deviation of the per-bar log return.
    pub sigma_per_bar: f64,
    pub substeps: usize,
    pub traded_value_median: f64,
    pub traded_value_sigma: f64,
}

impl Default for GbmSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_bars: 10_000,
            start: Utc.with_ymd_and_hms(2021, 1, 3, 0, 30, 0).unwrap(),
            initial_price: 1_000_000.0,
            sigma_per_bar: 0.003,
            substeps: 500,
            traded_value_median: 2_000_000.0,
            traded_value_sigma: 1.0,
        }
    }
}

/// Bars with mid OHLC from the fine path; bid = offer = close.
pub fn gen_gbm_bars(spec: &GbmSpec) -> Result<Vec<QuoteBar>, SynthError> {
    if spec.n_bars == 0 || spec.substeps == 0 || !(spec.initial_price > 0.0) || !(spec.sigma_per_bar >= 0.0) {
        return Err(SynthError::InvalidSpec("GBM spec needs bars, substeps and positive price".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let step_sd = spec.sigma_per_bar / (spec.substeps as f64).sqrt();
    let mut log_p = spec.initial_price.ln();
    let mut bars = Vec::with_capacity(spec.n_bars);
    for t in 0..spec.n_bars {
        let open = log_p;
        let (mut hi, mut lo) = (open, open);
        for _ in 0..spec.substeps {
            let z: f64 = StandardNormal.sample(&mut rng);
            log_p += step_sd * z;
            hi = hi.max(log_p);
            lo = lo.min(log_p);
        }
        let close = log_p.exp();
        let z: f64 = StandardNormal.sample(&mut rng);
        let tv = spec.traded_value_median * (spec.traded_value_sigma * z).exp();
        bars.push(QuoteBar::new(
            spec.start + grid_step() * t as i32,
            close,
            close,
            open.exp(),
            hi.exp(),
            lo.exp(),
            close,
            tv,
        )?);
    }
    Ok(bars)
}

/// Spreads = base + bump·[05:00 slot] + vol_coefficient·RS volatility + noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSpec {
    pub gbm: GbmSpec,
    pub base_spread: f64,
    pub bump: f64,
    pub vol_coefficient: f64,
    pub noise_sd: f64,
}

impl Default for SpreadSpec {
    fn default() -> Self {
        Self {
            gbm: GbmSpec { n_bars: 48 * 60, substeps: 60, ..GbmSpec::default() },
            base_spread: 0.001,
            bump: 0.002,
            vol_coefficient: 2.0,
            noise_sd: 0.0005,
        }
    }
}

pub fn gen_spread_bars(spec: &SpreadSpec) -> Result<BarSeries, SynthError> {
    let raw = gen_gbm_bars(&spec.gbm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.gbm.seed);
    rng.set_stream(7);
    let mut bars = Vec::with_capacity(raw.len());
    for b in raw {
        let vol = rogers_satchell(&b).map_err(|e| SynthError::InvalidSpec(e.to_string()))?.max(0.0).sqrt();
        let z: f64 = StandardNormal.sample(&mut rng);
        let bump = if b.half_hour_of_day() == BUMP_SLOT { spec.bump } else { 0.0 };
        let s = (spec.base_spread + bump + spec.vol_coefficient * vol + spec.noise_sd * z).max(0.0);
        // (offer − bid) / mid = s with mid = close.
        let mid = b.mid_close;
        let bar = QuoteBar::new(b.timestamp, mid * (1.0 - s / 2.0), mid * (1.0 + s / 2.0), b.mid_open, b.mid_high, b.mid_low, mid, b.traded_value)?;
        bars.push(bar);
    }
    Ok(BarSeries::from_bars("BTC", "SYNTH", grid_step(), bars)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microstructure::{intraday_spread_profile, spread_regression};

    #[test]
    fn gbm_bars_are_valid_and_seeded() {
        let spec = GbmSpec { n_bars: 100, substeps: 20, ..GbmSpec::default() };
        let a = gen_gbm_bars(&spec).unwrap();
        assert_eq!(a, gen_gbm_bars(&spec).unwrap());
        assert_eq!(a.len(), 100);
        assert!(a.windows(2).all(|w| w[1].mid_open == w[0].mid_close));
    }

    #[test]
    fn planted_bump_peaks_at_five_am() {
        let series = gen_spread_bars(&SpreadSpec::default()).unwrap();
        assert_eq!(intraday_spread_profile(&series).unwrap().peak_slot(), Some(10));
    }

    #[test]
    fn planted_volatility_coefficient_recovered() {
        let spec = SpreadSpec { bump: 0.0, ..SpreadSpec::default() };
        let r = spread_regression(&gen_spread_bars(&spec).unwrap()).unwrap();
        assert!((r.volatility.coefficient - 2.0).abs() < 0.2, "{:?}", r.volatility);
        assert!(r.ln_trading_value.t_stat.abs() < 3.0);
        assert_eq!(r.time_dummies.slots.len(), 47);
    }
}
