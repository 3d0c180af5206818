use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Innovations, SynthError};
use crate::econometrics::{EquationCoefficients, VecmSystem};
use crate::impulse::{simulate_system, GlobalDynamics, ImpulseConfig};
use crate::ingest::{fx_convert, resample_30m, FxRateSeries, RawQuoteRecord};
use crate::quotegrid::{align_pair, grid_step, AlignedPair};

/// Slot of the 05:00-05:30 UTC interval.
pub(crate) const BUMP_SLOT: usize = 10;
const RECORDS_PER_BAR: usize = 4;

const STREAM_LOCAL: u64 = 1;
const STREAM_GLOBAL: u64 = 2;
const STREAM_TEXTURE: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_bars: usize,
    /// Interval-end label of the first bar.
    pub start: DateTime<Utc>,
    pub asset: String,
    pub local_venue: String,
    pub global_venue: String,
    pub beta0: f64,
    pub beta1: f64,
    /// Local equation: constant, alpha_local, lags.
    pub local: EquationCoefficients,
    /// Global equation: constant, alpha_global, lags.
    pub global: EquationCoefficients,
    pub noise_local: f64,
    pub noise_global: f64,
    pub innovations: Innovations,
    /// Drift and persistence of the global price, ΔP_B gains φ0 + (φ1 − 1)·P_B.
    pub phi0: f64,
    pub phi1: f64,
    pub initial_global: f64,
    /// Absolute half-spreads in local currency.
    pub half_spread_local: f64,
    pub half_spread_global: f64,
    /// Relative widening of both half-spreads during the 05:00 slot.
    pub spread_bump: f64,
    /// Local currency per unit of the global quote currency.
    pub fx_rate: f64,
    pub traded_value_median: f64,
    pub traded_value_sigma: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_bars: 5000,
            start: Utc.with_ymd_and_hms(2020, 11, 22, 0, 30, 0).unwrap(),
            asset: "BTC".into(),
            local_venue: "LOCAL".into(),
            global_venue: "GLOBAL".into(),
            beta0: 0.0,
            beta1: 1.02,
            local: EquationCoefficients {
                constant: 0.0,
                alpha: -0.05,
                local_lags: vec![-0.53, -0.29, -0.07],
                global_lags: vec![0.9, 0.7, 0.33],
            },
            global: EquationCoefficients::zeros(3),
            noise_local: 1000.0,
            noise_global: 2000.0,
            innovations: Innovations::Gaussian,
            phi0: 0.0,
            phi1: 1.0,
            initial_global: 1_000_000.0,
            half_spread_local: 500.0,
            half_spread_global: 50.0,
            spread_bump: 0.0,
            fx_rate: 33.0,
            traded_value_median: 2_000_000.0,
            traded_value_sigma: 1.0,
        }
    }
}

impl SynthSpec {
    pub fn system(&self) -> VecmSystem {
        VecmSystem {
            beta0: self.beta0,
            beta1: self.beta1,
            local: self.local.clone(),
            global: self.global.clone(),
        }
    }

    pub fn lag_order(&self) -> usize {
        self.local.local_lags.len()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        self.system()
            .validate()
            .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        if self.n_bars < 2 {
            return bad(format!("n_bars {} is too small", self.n_bars));
        }
        if !(self.noise_local > 0.0 && self.noise_global > 0.0) {
            // Zero noise is allowed only as an exact fixed point.
            if !(self.noise_local == 0.0 && self.noise_global == 0.0) {
                return bad("noise scales must be positive".into());
            }
        }
        if !(self.phi1 > 0.0 && self.phi1 <= 1.0) {
            return bad(format!("phi1 {} must lie in (0, 1]", self.phi1));
        }
        for (name, v) in [
            ("initial_global", self.initial_global),
            ("fx_rate", self.fx_rate),
            ("traded_value_median", self.traded_value_median),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.half_spread_local < 0.0 || self.half_spread_global < 0.0 || self.spread_bump < 0.0 {
            return bad("spreads must be non-negative".into());
        }
        if self.traded_value_sigma < 0.0 {
            return bad("traded_value_sigma must be non-negative".into());
        }
        if self.beta0 + self.beta1 * self.initial_global <= 0.0 {
            return bad("equilibrium local price must be positive".into());
        }
        if grid_step().num_seconds() == 0 || !crate::quotegrid::on_grid(self.start, 30) {
            return bad(format!("start {} is not on the 30-minute grid", self.start));
        }
        self.innovations.validate()
    }

    /// Dry run of the noiseless dynamics from a shock.
    fn check_stability(&self, alphas: &[f64]) -> Result<(), SynthError> {
        let mut sys = self.system();
        for &a in alphas {
            sys.local.alpha = a;
            let cfg = ImpulseConfig {
                shock_fraction: 0.1,
                base_global_price: Some(self.initial_global),
                global_dynamics: GlobalDynamics::Full,
                horizon_bars: 2000,
            };
            simulate_system(&sys, &cfg, self.initial_global)
                .map_err(|e| SynthError::Unstable(e.to_string()))?;
        }
        Ok(())
    }
}

/// Bar-close mid prices (local currency) for both legs.
///
/// Local and global innovations come from separate streams, so a global leg
/// that ignores the local one is identical for any alpha schedule.
pub fn simulate_mids(
    spec: &SynthSpec,
    alpha_schedule: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<f64>), SynthError> {
    spec.validate()?;
    if let Some(s) = alpha_schedule {
        if s.len() != spec.n_bars {
            return Err(SynthError::InvalidSpec(format!(
                "alpha schedule has {} entries for {} bars",
                s.len(),
                spec.n_bars
            )));
        }
    }
    let alphas: Vec<f64> = match alpha_schedule {
        Some(s) => {
            let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            vec![lo, hi]
        }
        None => vec![spec.local.alpha],
    };
    spec.check_stability(&alphas)?;

    let p = spec.lag_order();
    let mut rng_a = ChaCha8Rng::seed_from_u64(spec.seed);
    rng_a.set_stream(STREAM_LOCAL);
    let mut rng_b = ChaCha8Rng::seed_from_u64(spec.seed);
    rng_b.set_stream(STREAM_GLOBAL);

    let b0 = spec.initial_global;
    let a0 = spec.beta0 + spec.beta1 * b0;
    let mut a_prev = a0;
    let mut b_prev = b0;
    let mut da = vec![0.0; p];
    let mut db = vec![0.0; p];
    let mut pa = Vec::with_capacity(spec.n_bars);
    let mut pb = Vec::with_capacity(spec.n_bars);
    for t in 0..spec.n_bars {
        let eta = a_prev - spec.beta1 * b_prev - spec.beta0;
        let alpha = alpha_schedule.map_or(spec.local.alpha, |s| s[t]);
        let mut local = spec.local.clone();
        local.alpha = alpha;
        let ea = spec.innovations.draw(&mut rng_a);
        let eb = spec.innovations.draw(&mut rng_b);
        let step_a = local.predict(eta, &da, &db, true) + spec.noise_local * ea;
        let step_b = spec.phi0
            + (spec.phi1 - 1.0) * b_prev
            + spec.global.predict(eta, &da, &db, true)
            + spec.noise_global * eb;
        let a = a_prev + step_a;
        let b = b_prev + step_b;
        for (price, half) in [(a, spec.half_spread_local), (b, spec.half_spread_global)] {
            if !(price - half * (1.0 + spec.spread_bump) > 0.0) || !price.is_finite() {
                return Err(SynthError::NonPositivePrice { bar: t, price });
            }
        }
        if p > 0 {
            da.rotate_right(1);
            db.rotate_right(1);
            da[0] = step_a;
            db[0] = step_b;
        }
        pa.push(a);
        pb.push(b);
        a_prev = a;
        b_prev = b;
    }
    Ok((pa, pb))
}

/// A generated pair as raw venue records plus the aligned pair that ingest
/// rebuilds from them.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub spec: SynthSpec,
    pub local_records: Vec<RawQuoteRecord>,
    /// Global records in the global quote currency.
    pub global_records: Vec<RawQuoteRecord>,
    pub fx: FxRateSeries,
    pub pair: AlignedPair,
    /// True bar-close mids in local currency.
    pub local_mid: Vec<f64>,
    pub global_mid: Vec<f64>,
}

pub fn gen_cointegrated_pair(spec: &SynthSpec) -> Result<SynthDataset, SynthError> {
    let (a, b) = simulate_mids(spec, None)?;
    build_dataset(spec, a, b)
}

pub(crate) fn bar_label(spec: &SynthSpec, t: usize) -> DateTime<Utc> {
    spec.start + grid_step() * t as i32
}

fn slot_of_label(label: DateTime<Utc>) -> usize {
    use chrono::Timelike;
    let s = label - grid_step();
    (s.hour() * 2 + s.minute() / 30) as usize
}

/// Four records per bar on a Brownian bridge from the previous close; the
/// last record sits on the bar end and carries the close.
pub(crate) fn build_dataset(
    spec: &SynthSpec,
    local_mid: Vec<f64>,
    global_mid: Vec<f64>,
) -> Result<SynthDataset, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(STREAM_TEXTURE);
    let n = local_mid.len();
    let step = Duration::seconds(grid_step().num_seconds() / RECORDS_PER_BAR as i64);
    let a_start = spec.beta0 + spec.beta1 * spec.initial_global;
    let mut local_records = Vec::with_capacity(n * RECORDS_PER_BAR);
    let mut global_records = Vec::with_capacity(n * RECORDS_PER_BAR);
    for t in 0..n {
        let label = bar_label(spec, t);
        let bump = if slot_of_label(label) == BUMP_SLOT { 1.0 + spec.spread_bump } else { 1.0 };
        let prev_a = if t == 0 { a_start } else { local_mid[t - 1] };
        let prev_b = if t == 0 { spec.initial_global } else { global_mid[t - 1] };
        let path_a = bridge(&mut rng, prev_a, local_mid[t], spec.noise_local);
        let path_b = bridge(&mut rng, prev_b, global_mid[t], spec.noise_global);
        for k in 0..RECORDS_PER_BAR {
            let ts = label - step * (RECORDS_PER_BAR - 1 - k) as i32;
            let tv_a = traded_value(&mut rng, spec);
            let tv_b = traded_value(&mut rng, spec) / spec.fx_rate;
            let ha = spec.half_spread_local * bump;
            let hb = spec.half_spread_global * bump;
            let ma = path_a[k];
            let mb = path_b[k];
            if ma - ha <= 0.0 || mb - hb <= 0.0 {
                return Err(SynthError::NonPositivePrice { bar: t, price: ma.min(mb) });
            }
            local_records.push(
                RawQuoteRecord::new(ts, ma - ha, ma + ha, Some(tv_a)).map_err(SynthError::InvalidSpec)?,
            );
            global_records.push(
                RawQuoteRecord::new(ts, (mb - hb) / spec.fx_rate, (mb + hb) / spec.fx_rate, Some(tv_b))
                    .map_err(SynthError::InvalidSpec)?,
            );
        }
    }
    let fx = FxRateSeries::constant(spec.start - grid_step(), spec.fx_rate)?;
    let pair = assemble_pair(spec, &local_records, &global_records, &fx)?;
    Ok(SynthDataset {
        spec: spec.clone(),
        local_records,
        global_records,
        fx,
        pair,
        local_mid,
        global_mid,
    })
}

/// The ingest path: resample both venues, convert the global leg, align.
pub(crate) fn assemble_pair(
    spec: &SynthSpec,
    local: &[RawQuoteRecord],
    global: &[RawQuoteRecord],
    fx: &FxRateSeries,
) -> Result<AlignedPair, SynthError> {
    let l = resample_30m(local, &spec.asset, &spec.local_venue)?;
    let g = resample_30m(global, &spec.asset, &spec.global_venue)?;
    let g = fx_convert(&g, fx)?;
    Ok(align_pair(&l, &g)?.pair)
}

fn bridge(rng: &mut ChaCha8Rng, from: f64, to: f64, sigma: f64) -> [f64; RECORDS_PER_BAR] {
    let mut out = [to; RECORDS_PER_BAR];
    let mut x = from;
    let m = RECORDS_PER_BAR as f64;
    for (k, slot) in out.iter_mut().enumerate().take(RECORDS_PER_BAR - 1) {
        let remaining = m - k as f64;
        let z: f64 = StandardNormal.sample(rng);
        x += (to - x) / remaining + sigma * ((remaining - 1.0) / (m * remaining)).sqrt() * z;
        *slot = x;
    }
    out
}

fn traded_value(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    spec.traded_value_median * (spec.traded_value_sigma * z).exp() / RECORDS_PER_BAR as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_equilibrium_is_a_fixed_point() {
        let spec = SynthSpec {
            noise_local: 0.0,
            noise_global: 0.0,
            n_bars: 50,
            ..SynthSpec::default()
        };
        let (a, b) = simulate_mids(&spec, None).unwrap();
        assert!(a.iter().all(|&v| v == a[0]));
        assert!(b.iter().all(|&v| v == spec.initial_global));
        let ds = build_dataset(&spec, a, b).unwrap();
        assert!(ds.pair.local().iter().all(|q| q.mid_high == q.mid_low));
    }

    #[test]
    fn seed_determinism_and_shape() {
        let spec = SynthSpec { n_bars: 400, seed: 17, ..SynthSpec::default() };
        let x = gen_cointegrated_pair(&spec).unwrap();
        let y = gen_cointegrated_pair(&spec).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.pair.len(), 400);
        assert!(x.pair.is_contiguous());
        assert_eq!(x.local_records.len(), 1600);
        // Bar close mids survive the trip through resampling.
        for (q, m) in x.pair.local().iter().zip(&x.local_mid) {
            assert!((q.mid_close - m).abs() < 1e-6);
        }
        let other = gen_cointegrated_pair(&SynthSpec { seed: 18, ..spec }).unwrap();
        assert_ne!(other.local_mid, x.local_mid);
    }

    #[test]
    fn global_leg_ignores_alpha_schedule() {
        let spec = SynthSpec { n_bars: 300, seed: 3, ..SynthSpec::default() };
        let (_, b1) = simulate_mids(&spec, None).unwrap();
        let sched: Vec<f64> = (0..300).map(|t| -0.1 - 0.001 * (t % 7) as f64).collect();
        let (_, b2) = simulate_mids(&spec, Some(&sched)).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn explosive_spec_is_rejected() {
        let mut spec = SynthSpec::default();
        spec.local.alpha = 0.5;
        assert!(matches!(simulate_mids(&spec, None), Err(SynthError::Unstable(_))));
        let neg = SynthSpec { noise_local: -1.0, ..SynthSpec::default() };
        assert!(matches!(simulate_mids(&neg, None), Err(SynthError::InvalidSpec(_))));
        let t = SynthSpec { innovations: Innovations::StudentT { df: 2.0 }, ..SynthSpec::default() };
        assert!(t.validate().is_err());
    }

    #[test]
    fn heavy_tails_run() {
        let spec = SynthSpec {
            n_bars: 200,
            innovations: Innovations::StudentT { df: 4.0 },
            ..SynthSpec::default()
        };
        assert!(gen_cointegrated_pair(&spec).is_ok());
    }
}
