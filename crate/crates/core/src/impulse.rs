//! Deterministic response of an estimated VECM to a one-time global price shock.
//!
//! Bar 0 is the pre-shock equilibrium and bar 1 the shock bar, where the
//! global price jumps and the local price cannot yet react. A horizon of
//! k half-hours is read at bar 1 + k.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::econometrics::{VecmFit, VecmSystem};

pub const DEFAULT_SHOCK: f64 = 0.30;
pub const DEFAULT_HORIZON_BARS: usize = 12;
/// Runaway bound relative to the shocked global level.
pub const INSTABILITY_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImpulseError {
    #[error("invalid impulse configuration: {0}")]
    InvalidConfig(String),
    #[error("explosive path at bar {bar} (level {level:.6e}); largest coefficients: {culprits:?}")]
    Unstable {
        bar: usize,
        level: f64,
        culprits: Vec<(String, f64)>,
    },
    #[error("horizon {horizon} needs bar {bar} but the path ends at bar {last}")]
    HorizonOutOfRange { horizon: Horizon, bar: usize, last: usize },
    #[error("invalid horizon {0:?}: expected a positive multiple of 30 minutes such as 30m, 1h or 1.5h")]
    BadHorizon(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlobalDynamics {
    #[default]
    Full,
    Frozen,
}

impl FromStr for GlobalDynamics {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "frozen" => Ok(Self::Frozen),
            o => Err(format!("unknown global dynamics {o:?} (full|frozen)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseConfig {
    pub shock_fraction: f64,
    /// None means the in-sample mean of the global leg.
    pub base_global_price: Option<f64>,
    pub global_dynamics: GlobalDynamics,
    pub horizon_bars: usize,
}

impl Default for ImpulseConfig {
    fn default() -> Self {
        Self {
            shock_fraction: DEFAULT_SHOCK,
            base_global_price: None,
            global_dynamics: GlobalDynamics::Full,
            horizon_bars: DEFAULT_HORIZON_BARS,
        }
    }
}

impl ImpulseConfig {
    pub fn validate(&self) -> Result<(), ImpulseError> {
        if self.shock_fraction == 0.0 || !self.shock_fraction.is_finite() || self.shock_fraction <= -1.0 {
            return Err(ImpulseError::InvalidConfig(format!(
                "shock fraction {} must be finite, nonzero and above -1",
                self.shock_fraction
            )));
        }
        if let Some(b) = self.base_global_price {
            if !(b > 0.0 && b.is_finite()) {
                return Err(ImpulseError::InvalidConfig(format!("base price {b} must be positive")));
            }
        }
        if self.horizon_bars == 0 {
            return Err(ImpulseError::InvalidConfig("horizon_bars must be at least 1".into()));
        }
        Ok(())
    }
}

/// A response horizon in minutes, a positive multiple of 30.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Horizon {
    minutes: u32,
}

impl Horizon {
    pub fn from_minutes(minutes: u32) -> Result<Self, ImpulseError> {
        if minutes == 0 || minutes % 30 != 0 {
            return Err(ImpulseError::BadHorizon(format!("{minutes}m")));
        }
        Ok(Self { minutes })
    }

    pub fn minutes(self) -> u32 {
        self.minutes
    }

    /// Half-hour steps after the shock bar.
    pub fn steps(self) -> usize {
        (self.minutes / 30) as usize
    }

    pub fn bar(self) -> usize {
        1 + self.steps()
    }

    /// 30m, 1h, 1.5h, 2h, 2.5h.
    pub fn defaults() -> Vec<Horizon> {
        (1..=5).map(|k| Horizon { minutes: 30 * k }).collect()
    }

    pub fn parse_list(s: &str) -> Result<Vec<Horizon>, ImpulseError> {
        let mut v: Vec<Horizon> = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        if v.is_empty() {
            return Err(ImpulseError::BadHorizon(s.to_string()));
        }
        v.sort();
        v.dedup();
        Ok(v)
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.minutes < 60 {
            write!(f, "{}m", self.minutes)
        } else if self.minutes % 60 == 0 {
            write!(f, "{}h", self.minutes / 60)
        } else {
            write!(f, "{}.5h", self.minutes / 60)
        }
    }
}

impl FromStr for Horizon {
    type Err = ImpulseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let bad = || ImpulseError::BadHorizon(s.to_string());
        let minutes = if let Some(m) = t.strip_suffix("min").or_else(|| t.strip_suffix('m')) {
            m.trim().parse::<f64>().map_err(|_| bad())?
        } else if let Some(h) = t.strip_suffix('h') {
            h.trim().parse::<f64>().map_err(|_| bad())? * 60.0
        } else {
            return Err(bad());
        };
        if !(minutes > 0.0) || minutes.fract() != 0.0 || minutes > u32::MAX as f64 {
            return Err(bad());
        }
        Horizon::from_minutes(minutes as u32).map_err(|_| bad())
    }
}

impl Serialize for Horizon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpulsePoint {
    pub bar: usize,
    pub local: f64,
    pub global: f64,
    pub rqv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpulsePath {
    pub points: Vec<ImpulsePoint>,
    pub system: VecmSystem,
    pub config: ImpulseConfig,
    pub base_global_price: f64,
    pub shocked_level: f64,
}

impl ImpulsePath {
    pub fn rqv_at_bar(&self, bar: usize) -> Option<f64> {
        self.points.get(bar).map(|p| p.rqv)
    }

    pub fn last_bar(&self) -> usize {
        self.points.len() - 1
    }

    /// First bar at which local can react to the shock.
    pub fn first_response_bar(&self) -> usize {
        2
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), ImpulseError> {
        let mut w = csv::Writer::from_writer(sink);
        let io = |e: csv::Error| ImpulseError::Io(e.to_string());
        w.write_record(["bar", "local", "global", "rqv"]).map_err(io)?;
        for p in &self.points {
            w.write_record([
                p.bar.to_string(),
                p.local.to_string(),
                p.global.to_string(),
                p.rqv.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| ImpulseError::Io(e.to_string()))
    }
}

/// Impulse response of an estimated fit; the base defaults to its global mean.
pub fn simulate_impulse(fit: &VecmFit, cfg: &ImpulseConfig) -> Result<ImpulsePath, ImpulseError> {
    let base = cfg.base_global_price.unwrap_or(fit.global_mean);
    simulate_system(&fit.system(), cfg, base)
}

/// Impulse response of a hand-specified system. Equation constants are not
/// applied: the path measures the response to the shock alone.
pub fn simulate_system(
    sys: &VecmSystem,
    cfg: &ImpulseConfig,
    base: f64,
) -> Result<ImpulsePath, ImpulseError> {
    cfg.validate()?;
    if !(base > 0.0 && base.is_finite()) {
        return Err(ImpulseError::InvalidConfig(format!("base price {base} must be positive")));
    }
    sys.validate().map_err(|e| ImpulseError::InvalidConfig(e.to_string()))?;
    let levels = iterate(sys, cfg.global_dynamics, base, cfg.shock_fraction, cfg.horizon_bars + 1, true)?;
    let shocked = base * (1.0 + cfg.shock_fraction);
    let points = levels
        .into_iter()
        .enumerate()
        .map(|(bar, (local, global))| ImpulsePoint {
            bar,
            local,
            global,
            rqv: local / shocked,
        })
        .collect();
    Ok(ImpulsePath {
        points,
        system: sys.clone(),
        config: ImpulseConfig {
            base_global_price: Some(base),
            ..*cfg
        },
        base_global_price: base,
        shocked_level: shocked,
    })
}

/// Levels for bars 0..=last_bar.
fn iterate(
    sys: &VecmSystem,
    dynamics: GlobalDynamics,
    base: f64,
    shock: f64,
    last_bar: usize,
    guard: bool,
) -> Result<Vec<(f64, f64)>, ImpulseError> {
    let p = sys.lag_order();
    let shocked = base * (1.0 + shock);
    let bound = INSTABILITY_FACTOR * shocked.abs();
    let eq = sys.beta0 + sys.beta1 * base;
    let mut out = Vec::with_capacity(last_bar + 1);
    out.push((eq, base));
    out.push((eq, shocked));
    // Differences, most recent first.
    let mut da = vec![0.0; p.max(1)];
    let mut db = vec![0.0; p.max(1)];
    db[0] = shocked - base;
    for bar in 2..=last_bar {
        let (a, b) = out[bar - 1];
        let eta = a - sys.beta1 * b - sys.beta0;
        let step_a = sys.local.predict(eta, &da[..p], &db[..p], false);
        let step_b = match dynamics {
            GlobalDynamics::Full => sys.global.predict(eta, &da[..p], &db[..p], false),
            GlobalDynamics::Frozen => 0.0,
        };
        let next = (a + step_a, b + step_b);
        if guard {
            let worst = next.0.abs().max(next.1.abs());
            if !worst.is_finite() || worst > bound {
                return Err(ImpulseError::Unstable {
                    bar,
                    level: if next.0.abs() >= next.1.abs() { next.0 } else { next.1 },
                    culprits: culprits(sys),
                });
            }
        }
        da.rotate_right(1);
        db.rotate_right(1);
        da[0] = step_a;
        db[0] = step_b;
        out.push(next);
    }
    Ok(out)
}

fn culprits(sys: &VecmSystem) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = sys
        .named_coefficients()
        .into_iter()
        .filter(|(n, _)| !n.ends_with(".constant"))
        .collect();
    v.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    v.truncate(3);
    v
}

/// RQV at each requested horizon.
pub fn relative_quote_values(
    path: &ImpulsePath,
    horizons: &[Horizon],
) -> Result<BTreeMap<Horizon, f64>, ImpulseError> {
    horizons
        .iter()
        .map(|&h| {
            path.rqv_at_bar(h.bar())
                .map(|v| (h, v))
                .ok_or(ImpulseError::HorizonOutOfRange {
                    horizon: h,
                    bar: h.bar(),
                    last: path.last_bar(),
                })
        })
        .collect()
}

/// Long-run RQV. Analytic when the global leg is frozen; otherwise the
/// path is iterated until successive levels agree to 1e-13 relative.
/// Returns None if the full-dynamics path does not settle.
pub fn long_run_rqv(sys: &VecmSystem, cfg: &ImpulseConfig, base: f64) -> Option<f64> {
    let shocked = base * (1.0 + cfg.shock_fraction);
    match cfg.global_dynamics {
        GlobalDynamics::Frozen => Some((sys.beta0 + sys.beta1 * shocked) / shocked),
        GlobalDynamics::Full => {
            const MAX_BARS: usize = 200_000;
            let mut horizon = 256;
            while horizon <= MAX_BARS {
                let path = iterate(sys, GlobalDynamics::Full, base, cfg.shock_fraction, horizon, false).ok()?;
                let tail = &path[path.len() - 16..];
                let (a0, _) = tail[0];
                let settled = tail.iter().all(|(a, b)| {
                    a.is_finite() && b.is_finite() && (a - a0).abs() <= 1e-13 * a0.abs().max(1.0)
                });
                if settled {
                    return Some(path[path.len() - 1].0 / shocked);
                }
                horizon *= 4;
            }
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::EquationCoefficients;

    fn simple(alpha: f64) -> VecmSystem {
        VecmSystem {
            beta0: 0.0,
            beta1: 1.0,
            local: EquationCoefficients {
                alpha,
                ..EquationCoefficients::zeros(3)
            },
            global: EquationCoefficients::zeros(3),
        }
    }

    fn frozen() -> ImpulseConfig {
        ImpulseConfig {
            global_dynamics: GlobalDynamics::Frozen,
            ..ImpulseConfig::default()
        }
    }

    #[test]
    fn full_correction_in_one_step() {
        let path = simulate_system(&simple(-1.0), &frozen(), 100.0).unwrap();
        assert_eq!(path.points[1].local, 100.0);
        assert_eq!(path.points[2].local, 130.0);
        assert_eq!(path.points[2].rqv, 1.0);
        let r = relative_quote_values(&path, &Horizon::defaults()).unwrap();
        assert_eq!(r[&"30m".parse().unwrap()], 1.0);
    }

    #[test]
    fn no_adjustment_channel() {
        let path = simulate_system(&simple(0.0), &ImpulseConfig::default(), 100.0).unwrap();
        for p in &path.points[1..] {
            assert!((p.rqv - 1.0 / 1.3).abs() < 1e-15);
        }
        let r = relative_quote_values(&path, &Horizon::defaults()).unwrap();
        assert!(r.values().all(|v| (v - 0.769_230_769_230_769_2).abs() < 1e-12));
    }

    #[test]
    fn rqv_definition_is_exact() {
        let mut sys = simple(-0.2);
        sys.local.local_lags = vec![0.1, -0.05, 0.02];
        sys.local.global_lags = vec![0.3, 0.1, 0.0];
        let cfg = ImpulseConfig { base_global_price: Some(123.0), ..ImpulseConfig::default() };
        let path = simulate_system(&sys, &cfg, 123.0).unwrap();
        for p in &path.points {
            assert_eq!(p.rqv, p.local / (123.0 * 1.3));
        }
        assert_eq!(path.points.len(), cfg.horizon_bars + 2);
    }

    #[test]
    fn constants_do_not_drive_the_path() {
        let mut sys = simple(0.0);
        sys.local.constant = 5.0;
        sys.global.constant = -3.0;
        let path = simulate_system(&sys, &ImpulseConfig::default(), 100.0).unwrap();
        assert!(path.points.iter().skip(1).all(|p| p.local == 100.0 && p.global == 130.0));
    }

    #[test]
    fn explosive_path_is_reported() {
        let mut sys = simple(0.0);
        sys.local.local_lags = vec![1.8, 0.0, 0.0];
        sys.local.global_lags = vec![1.0, 0.0, 0.0];
        match simulate_system(&sys, &ImpulseConfig { horizon_bars: 60, ..frozen() }, 100.0) {
            Err(ImpulseError::Unstable { culprits, .. }) => {
                assert_eq!(culprits[0].0, "local.local_lag1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn horizon_parsing_and_range() {
        let hs = Horizon::parse_list("30m,1h,1.5h,2h,2.5h").unwrap();
        assert_eq!(hs, Horizon::defaults());
        assert_eq!(hs[2].to_string(), "1.5h");
        assert_eq!("90min".parse::<Horizon>().unwrap().bar(), 4);
        assert!("45m".parse::<Horizon>().is_err());
        assert!("0h".parse::<Horizon>().is_err());
        assert!("h".parse::<Horizon>().is_err());
        let path = simulate_system(&simple(-0.5), &ImpulseConfig { horizon_bars: 2, ..frozen() }, 10.0).unwrap();
        assert!(matches!(
            relative_quote_values(&path, &["1.5h".parse().unwrap()]),
            Err(ImpulseError::HorizonOutOfRange { bar: 4, last: 3, .. })
        ));
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            ImpulseConfig { shock_fraction: 0.0, ..ImpulseConfig::default() },
            ImpulseConfig { horizon_bars: 0, ..ImpulseConfig::default() },
            ImpulseConfig { base_global_price: Some(-1.0), ..ImpulseConfig::default() },
        ] {
            assert!(matches!(
                simulate_system(&simple(-0.1), &cfg, 1.0),
                Err(ImpulseError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn long_run_frozen_and_full_agree_without_global_feedback() {
        let mut sys = simple(-0.1);
        sys.beta1 = 1.02;
        sys.local.global_lags = vec![0.2, 0.0, 0.0];
        let a = long_run_rqv(&sys, &frozen(), 1000.0).unwrap();
        let b = long_run_rqv(&sys, &ImpulseConfig::default(), 1000.0).unwrap();
        assert!((a - 1.02).abs() < 1e-15);
        assert!((a - b).abs() < 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn stable_system() -> impl Strategy<Value = VecmSystem> {
            (
                -0.6f64..-0.02,
                prop::collection::vec(-0.15f64..0.15, 3),
                prop::collection::vec(-0.3f64..0.3, 3),
                0.8f64..1.2,
            )
                .prop_map(|(alpha, ll, gl, b1)| VecmSystem {
                    beta0: 0.0,
                    beta1: b1,
                    local: EquationCoefficients { constant: 0.0, alpha, local_lags: ll, global_lags: gl },
                    global: EquationCoefficients::zeros(3),
                })
        }

        proptest! {
            #[test]
            fn deterministic(sys in stable_system()) {
                let a = simulate_system(&sys, &ImpulseConfig::default(), 500.0).unwrap();
                let b = simulate_system(&sys, &ImpulseConfig::default(), 500.0).unwrap();
                prop_assert_eq!(a, b);
            }

            #[test]
            fn scale_invariance(sys in stable_system(), c in 1e-3f64..1e3) {
                let a = simulate_system(&sys, &frozen(), 1000.0).unwrap();
                let b = simulate_system(&sys, &frozen(), 1000.0 * c).unwrap();
                for (x, y) in a.points.iter().zip(&b.points) {
                    prop_assert!((x.rqv - y.rqv).abs() <= 1e-12);
                    prop_assert!((x.local * c - y.local).abs() <= 1e-12 * y.local.abs());
                }
            }

            #[test]
            fn sign_symmetry(mut sys in stable_system()) {
                sys.beta1 = 1.0;
                let up = simulate_system(&sys, &frozen(), 1000.0).unwrap();
                let down = simulate_system(&sys, &ImpulseConfig { shock_fraction: -0.3, ..frozen() }, 1000.0).unwrap();
                // Deviations scaled back to the shocked level mirror each other.
                for (u, d) in up.points.iter().zip(&down.points).skip(1) {
                    let du = (u.rqv - 1.0) * 1.3;
                    let dd = (d.rqv - 1.0) * 0.7;
                    prop_assert!((du + dd).abs() <= 1e-12);
                }
            }

            #[test]
            fn converges_by_ten_half_lives(sys in stable_system()) {
                let lr = long_run_rqv(&sys, &frozen(), 1000.0).unwrap();
                let probe = simulate_system(&sys, &ImpulseConfig { horizon_bars: 2000, ..frozen() }, 1000.0);
                prop_assume!(probe.is_ok());
                let probe = probe.unwrap();
                // Envelope half-life: the gap envelope halves at least every `half` bars.
                let gaps: Vec<f64> = probe.points.iter().map(|p| (p.rqv - lr).abs()).collect();
                let mut env = gaps.clone();
                for i in (0..env.len() - 1).rev() {
                    env[i] = env[i].max(env[i + 1]);
                }
                let last = probe.last_bar();
                let half = (1..last / 20).find(|&h| {
                    (1..=last - h).all(|t| env[t] < 1e-9 || env[t + h] <= 0.5 * env[t])
                });
                prop_assume!(half.is_some());
                let half = half.unwrap();
                let at = probe.points[1 + 10 * half].rqv;
                prop_assert!((at - lr).abs() < 0.005, "half-life {} gap {}", half, at - lr);
            }
        }
    }
}
