use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::pair::{bar_label, build_dataset, simulate_mids, SynthDataset, SynthSpec};
use super::trades::{gen_trades, GainPoint, TradeBar, TradeSpec};
use super::SynthError;
use crate::econometrics::EquationCoefficients;
use crate::ingest::TradeRecord;
use crate::quotegrid::{grid_step, is_sunday_midnight, BARS_PER_WEEK};

pub const MIN_SCENARIO_WEEKS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    Disposition,
    HouseMoney,
    None,
}

impl BiasKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BiasKind::Disposition => "disposition",
            BiasKind::HouseMoney => "house_money",
            BiasKind::None => "none",
        }
    }

    /// Sign of the planted RQV-on-gain slope.
    pub fn slope_sign(self) -> f64 {
        match self {
            BiasKind::Disposition => -1.0,
            BiasKind::HouseMoney => 1.0,
            BiasKind::None => 0.0,
        }
    }
}

impl fmt::Display for BiasKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "disposition" => Ok(BiasKind::Disposition),
            "house_money" => Ok(BiasKind::HouseMoney),
            "none" => Ok(BiasKind::None),
            o => Err(format!("unknown scenario kind {o:?} (disposition|house_money|none)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: BiasKind,
    pub weeks: usize,
    pub seed: u64,
    /// Sunday 00:00 UTC opening the first week.
    pub anchor: DateTime<Utc>,
    /// Pair dynamics; `local.alpha` is the center of the weekly modulation.
    /// `seed`, `n_bars` and `start` are overridden.
    pub pair: SynthSpec,
    pub trades: TradeSpec,
    /// Magnitude of the planted slope of 30-minute RQV on the gain proportion.
    pub slope_magnitude: f64,
    /// Impulse size the planted slope refers to.
    pub shock_fraction: f64,
}

impl ScenarioSpec {
    pub fn new(kind: BiasKind, weeks: usize, seed: u64) -> Self {
        Self {
            kind,
            weeks,
            seed,
            anchor: Utc.with_ymd_and_hms(2020, 11, 22, 0, 0, 0).unwrap(),
            pair: SynthSpec {
                local: EquationCoefficients {
                    constant: 0.0,
                    alpha: -0.2,
                    local_lags: vec![-0.1, 0.0, 0.0],
                    global_lags: vec![0.65, 0.1, 0.0],
                },
                // Far enough from zero that a 109-week walk stays positive.
                initial_global: 4_000_000.0,
                ..SynthSpec::default()
            },
            trades: TradeSpec::default(),
            slope_magnitude: 0.05,
            shock_fraction: 0.30,
        }
    }

    pub fn planted_slope(&self) -> f64 {
        self.kind.slope_sign() * self.slope_magnitude
    }

    /// Local loading giving the planted 30-minute RQV at gain proportion `pct`.
    ///
    /// With no global feedback the first responding bar sits at
    /// (β₁ + s·(δ₁ − α·β₁)) / (1 + s), linear in α.
    pub fn alpha_for(&self, pct: f64) -> f64 {
        let s = self.shock_fraction;
        let d_rqv_d_alpha = -self.pair.beta1 * s / (1.0 + s);
        self.pair.local.alpha + self.planted_slope() * (pct - 0.5) / d_rqv_d_alpha
    }

    pub fn pair_spec(&self) -> SynthSpec {
        SynthSpec {
            seed: self.seed,
            n_bars: self.weeks * BARS_PER_WEEK,
            start: self.anchor + grid_step(),
            ..self.pair.clone()
        }
    }

    pub fn trade_spec(&self) -> TradeSpec {
        TradeSpec {
            seed: self.seed ^ 0x7472_6164_6573,
            asset: self.pair.asset.clone(),
            ..self.trades.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.weeks < MIN_SCENARIO_WEEKS {
            return Err(SynthError::InvalidSpec(format!(
                "scenario needs at least {MIN_SCENARIO_WEEKS} weeks, got {}",
                self.weeks
            )));
        }
        if !is_sunday_midnight(self.anchor) {
            return Err(SynthError::InvalidSpec(format!("anchor {} is not a Sunday midnight", self.anchor)));
        }
        if self.pair.global != EquationCoefficients::zeros(self.pair.lag_order()) || self.pair.phi1 != 1.0 {
            return Err(SynthError::InvalidSpec(
                "scenario global leg must be a driftless-coefficient random walk".into(),
            ));
        }
        if !(self.shock_fraction > 0.0) || !(self.slope_magnitude >= 0.0) {
            return Err(SynthError::InvalidSpec("shock and slope magnitude must be positive".into()));
        }
        self.pair_spec().validate()?;
        self.trade_spec().validate()
    }
}

/// Ground truth emitted alongside a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOracle {
    pub kind: BiasKind,
    pub weeks: usize,
    pub bars_per_week: usize,
    pub conditioning: &'static str,
    pub horizon: &'static str,
    pub planted_slope: f64,
    pub alpha_center: f64,
    pub alpha_by_week: Vec<f64>,
    /// Gain proportion at each week end marked at the equilibrium price; drives alpha.
    pub planning_pct_by_week: Vec<Option<f64>>,
    /// Gain proportion at each week end marked at the local mid close.
    pub pct_by_week: Vec<Option<f64>>,
    /// Gain proportion after every bar, marked at the local mid close.
    pub gain_path: Vec<GainPoint>,
    pub pair: SynthSpec,
    pub trades: TradeSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDataset {
    pub spec: ScenarioSpec,
    pub data: SynthDataset,
    pub trades: Vec<TradeRecord>,
    pub oracle: ScenarioOracle,
}

/// Multi-week dataset whose local adjustment speed depends on the week-end
/// gain proportion according to `kind`.
pub fn gen_biased_scenario(spec: &ScenarioSpec) -> Result<ScenarioDataset, SynthError> {
    spec.validate()?;
    let pair_spec = spec.pair_spec();
    let trade_spec = spec.trade_spec();
    let n = pair_spec.n_bars;

    // The global leg does not depend on the local one, so draw it first.
    let (_, global) = simulate_mids(&pair_spec, None)?;
    let plan_bars: Vec<TradeBar> = (0..n)
        .map(|t| {
            let eq = pair_spec.beta0 + pair_spec.beta1 * global[t];
            TradeBar { label: bar_label(&pair_spec, t), trade_price: eq, mark_price: eq }
        })
        .collect();
    let plan = gen_trades(&trade_spec, &plan_bars)?;
    let week_end = |w: usize| (w + 1) * BARS_PER_WEEK - 1;
    let planning_pct: Vec<Option<f64>> = (0..spec.weeks).map(|w| plan.oracle[week_end(w)].pct_in_gain).collect();
    let alpha_by_week: Vec<f64> = planning_pct.iter().map(|p| spec.alpha_for(p.unwrap_or(0.5))).collect();
    let schedule: Vec<f64> = (0..n).map(|t| alpha_by_week[t / BARS_PER_WEEK]).collect();

    let (local, global2) = simulate_mids(&pair_spec, Some(&schedule))?;
    debug_assert_eq!(global, global2);
    let data = build_dataset(&pair_spec, local, global2)?;

    let marked: Vec<TradeBar> = plan_bars
        .iter()
        .zip(data.pair.local())
        .map(|(b, q)| TradeBar { mark_price: q.mid_close, ..*b })
        .collect();
    let sim = gen_trades(&trade_spec, &marked)?;
    debug_assert_eq!(sim.trades, plan.trades);
    let pct_by_week = (0..spec.weeks).map(|w| sim.oracle[week_end(w)].pct_in_gain).collect();

    Ok(ScenarioDataset {
        spec: spec.clone(),
        oracle: ScenarioOracle {
            kind: spec.kind,
            weeks: spec.weeks,
            bars_per_week: BARS_PER_WEEK,
            conditioning: "pct_gain",
            horizon: "30m",
            planted_slope: spec.planted_slope(),
            alpha_center: spec.pair.local.alpha,
            alpha_by_week,
            planning_pct_by_week: planning_pct,
            pct_by_week,
            gain_path: sim.oracle,
            pair: pair_spec,
            trades: trade_spec,
        },
        trades: sim.trades,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_differ_only_in_modulation_sign() {
        let d = ScenarioSpec::new(BiasKind::Disposition, 40, 5);
        let h = ScenarioSpec::new(BiasKind::HouseMoney, 40, 5);
        assert_eq!(d.pair, h.pair);
        assert_eq!(d.trades, h.trades);
        assert_eq!(d.planted_slope(), -h.planted_slope());
        for pct in [0.0, 0.3, 0.9] {
            let c = d.pair.local.alpha;
            assert!(((d.alpha_for(pct) - c) + (h.alpha_for(pct) - c)).abs() < 1e-15);
        }
        let none = ScenarioSpec::new(BiasKind::None, 40, 5);
        assert_eq!(none.alpha_for(0.9), none.pair.local.alpha);
    }

    #[test]
    fn planted_alpha_moves_first_bar_rqv_by_the_slope() {
        let s = ScenarioSpec::new(BiasKind::Disposition, 40, 1);
        let rqv = |a: f64| {
            let b1 = s.pair.beta1;
            let d1 = s.pair.local.global_lags[0];
            (b1 + s.shock_fraction * (d1 - a * b1)) / (1.0 + s.shock_fraction)
        };
        let slope = rqv(s.alpha_for(0.8)) - rqv(s.alpha_for(0.7));
        assert!((slope / 0.1 + 0.05).abs() < 1e-12);
    }

    #[test]
    fn scenario_shape_and_determinism() {
        let spec = ScenarioSpec {
            trades: TradeSpec { n_accounts: 100, ..TradeSpec::default() },
            ..ScenarioSpec::new(BiasKind::Disposition, 30, 9)
        };
        let a = gen_biased_scenario(&spec).unwrap();
        assert_eq!(a.data.pair.len(), 30 * BARS_PER_WEEK);
        assert_eq!(a.oracle.alpha_by_week.len(), 30);
        assert_eq!(a.oracle.gain_path.len(), 30 * BARS_PER_WEEK);
        assert_eq!(a, gen_biased_scenario(&spec).unwrap());
        assert!(matches!(
            gen_biased_scenario(&ScenarioSpec::new(BiasKind::None, 10, 1)),
            Err(SynthError::InvalidSpec(_))
        ));
    }
}
