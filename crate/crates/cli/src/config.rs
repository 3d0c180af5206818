//! Run configuration: a flat `key = value` file overlaid by command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use quotelag_core::biaslab::{CostBasis, GainTiming, PanelConfig};
use quotelag_core::econometrics::SeMode;
use quotelag_core::impulse::{GlobalDynamics, Horizon, ImpulseConfig};
use quotelag_core::ingest::parse_timestamp;
use quotelag_core::quotegrid::{is_sunday_midnight, DEFAULT_MIN_WEEK_ROWS};
use quotelag_core::synth::BiasKind;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &[
    "input.local",
    "input.global",
    "input.fx",
    "input.trades",
    "input.data",
    "input.panel",
    "input.system",
    "asset",
    "estimate.p",
    "estimate.force",
    "estimate.se_mode",
    "impulse.shock_fraction",
    "impulse.global_dynamics",
    "impulse.base_global_price",
    "impulse.horizon_bars",
    "horizons",
    "panel.anchor",
    "panel.min_rows",
    "panel.unit_root_precheck",
    "panel.gain_basis",
    "panel.gain_timing",
    "classify.significance",
    "classify.fast_adjustment_floor",
    "output.dir",
    "seed",
    "workers",
    "simulate.kind",
    "simulate.weeks",
    "simulate.bars",
];

const PATH_KEYS: &[&str] = &[
    "input.local",
    "input.global",
    "input.fx",
    "input.trades",
    "input.data",
    "input.panel",
    "input.system",
    "output.dir",
];

pub const DEFAULT_OUT: &str = "quotelag-out";
pub const DEFAULT_WEEKS: usize = 109;
pub const DEFAULT_SIM_BARS: usize = 5000;

/// Parse config text. Relative paths are resolved against `base`.
pub fn parse_config_text(text: &str, base: Option<&Path>) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().to_string();
        let mut value = v.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::config(format!("config line {}: unknown key '{key}'", i + 1)));
        }
        let value = match base {
            Some(b) if PATH_KEYS.contains(&key.as_str()) && Path::new(value).is_relative() => {
                b.join(value).to_string_lossy().into_owned()
            }
            _ => value.to_string(),
        };
        if out.insert(key.clone(), value).is_some() {
            return Err(CliError::config(format!("config line {}: duplicate key '{key}'", i + 1)));
        }
    }
    Ok(out)
}

pub fn load_config_file(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text, path.parent())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inputs {
    pub local: Option<PathBuf>,
    pub global: Option<PathBuf>,
    pub fx: Option<PathBuf>,
    pub trades: Option<PathBuf>,
    pub panel: Option<PathBuf>,
    pub system: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub asset: String,
    pub p: usize,
    pub force: bool,
    pub se_mode: SeMode,
    pub impulse: ImpulseConfig,
    pub horizons: Vec<Horizon>,
    pub anchor: Option<DateTime<Utc>>,
    pub min_rows: usize,
    pub unit_root_precheck: bool,
    pub gain_basis: CostBasis,
    pub gain_timing: GainTiming,
    pub significance: f64,
    pub fast_adjustment_floor: f64,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: Option<usize>,
    pub kind: Option<BiasKind>,
    pub weeks: usize,
    pub bars: usize,
}

struct Values<'a>(&'a BTreeMap<String, String>);

impl Values<'_> {
    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::config(format!("{key} = '{v}': {e}"))))
            .transpose()
    }

    fn flag(&self, key: &str) -> CliResult<Option<bool>> {
        self.get(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(CliError::config(format!("{key} = '{v}': expected true or false"))),
            })
            .transpose()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }
}

fn readable(key: &str, path: &Path) -> CliResult<()> {
    fs::File::open(path)
        .and_then(|f| f.metadata())
        .and_then(|m| {
            if m.is_file() {
                Ok(())
            } else {
                Err(std::io::Error::other("not a regular file"))
            }
        })
        .map_err(|e| CliError::config(format!("{key}: cannot read {}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(map: &BTreeMap<String, String>) -> CliResult<Self> {
        for k in map.keys() {
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::config(format!("unknown key '{k}'")));
            }
        }
        let v = Values(map);

        let mut inputs = Inputs {
            local: v.path("input.local"),
            global: v.path("input.global"),
            fx: v.path("input.fx"),
            trades: v.path("input.trades"),
            panel: v.path("input.panel"),
            system: v.path("input.system"),
        };
        if let Some(dir) = v.path("input.data") {
            if !dir.is_dir() {
                return Err(CliError::config(format!("input.data: {} is not a directory", dir.display())));
            }
            inputs.local.get_or_insert_with(|| dir.join("local_quotes.csv"));
            inputs.global.get_or_insert_with(|| dir.join("global_quotes.csv"));
            inputs.fx.get_or_insert_with(|| dir.join("fx.csv"));
            if inputs.trades.is_none() && dir.join("trades.csv").is_file() {
                inputs.trades = Some(dir.join("trades.csv"));
            }
        }
        for (key, path) in [
            ("input.local", &inputs.local),
            ("input.global", &inputs.global),
            ("input.fx", &inputs.fx),
            ("input.trades", &inputs.trades),
            ("input.panel", &inputs.panel),
            ("input.system", &inputs.system),
        ] {
            if let Some(p) = path {
                readable(key, p)?;
            }
        }

        let p = v.parse::<usize>("estimate.p")?.unwrap_or(3);
        if p == 0 {
            return Err(CliError::config("estimate.p must be at least 1"));
        }
        let se_mode = match v.get("estimate.se_mode").map(str::to_ascii_lowercase).as_deref() {
            None | Some("classical") => SeMode::Classical,
            Some("hc1") => SeMode::Hc1,
            Some(o) => return Err(CliError::config(format!("estimate.se_mode = '{o}': expected classical or hc1"))),
        };

        let defaults = ImpulseConfig::default();
        let impulse = ImpulseConfig {
            shock_fraction: v.parse("impulse.shock_fraction")?.unwrap_or(defaults.shock_fraction),
            base_global_price: v.parse("impulse.base_global_price")?,
            global_dynamics: v.parse::<GlobalDynamics>("impulse.global_dynamics")?.unwrap_or(defaults.global_dynamics),
            horizon_bars: v.parse("impulse.horizon_bars")?.unwrap_or(defaults.horizon_bars),
        };
        impulse.validate().map_err(|e| CliError::config(e.to_string()))?;

        let horizons = match v.get("horizons") {
            Some(s) => Horizon::parse_list(s).map_err(|e| CliError::config(format!("horizons: {e}")))?,
            None => Horizon::defaults(),
        };
        let last = horizons.iter().map(|h| h.bar()).max().unwrap_or(0);
        if last > impulse.horizon_bars + 1 {
            return Err(CliError::config(format!(
                "horizon {} needs impulse.horizon_bars >= {}",
                horizons.last().unwrap(),
                last - 1
            )));
        }

        let anchor = v
            .get("panel.anchor")
            .map(|s| parse_timestamp(s).map_err(|e| CliError::config(format!("panel.anchor: {e}"))))
            .transpose()?;
        if let Some(a) = anchor {
            if !is_sunday_midnight(a) {
                return Err(CliError::config(format!("panel.anchor {a} is not a Sunday 00:00 UTC")));
            }
        }

        let gain_basis = match v.get("panel.gain_basis").map(str::to_ascii_lowercase).as_deref() {
            None | Some("average_cost") => CostBasis::AverageCost,
            Some("fifo") => CostBasis::Fifo,
            Some(o) => return Err(CliError::config(format!("panel.gain_basis = '{o}': expected average_cost or fifo"))),
        };
        let gain_timing = match v.get("panel.gain_timing").map(str::to_ascii_lowercase).as_deref() {
            None | Some("week_end") => GainTiming::WeekEnd,
            Some("week_start") => GainTiming::WeekStart,
            Some(o) => return Err(CliError::config(format!("panel.gain_timing = '{o}': expected week_end or week_start"))),
        };

        let significance = v.parse::<f64>("classify.significance")?.unwrap_or(0.05);
        if !(significance > 0.0 && significance < 1.0) {
            return Err(CliError::config(format!("classify.significance {significance} must lie in (0, 1)")));
        }
        let fast_adjustment_floor = v.parse::<f64>("classify.fast_adjustment_floor")?.unwrap_or(0.97);
        if !fast_adjustment_floor.is_finite() {
            return Err(CliError::config("classify.fast_adjustment_floor must be finite"));
        }

        let workers = v.parse::<usize>("workers")?;
        if workers == Some(0) {
            return Err(CliError::config("workers must be at least 1"));
        }
        let kind = v.parse::<BiasKind>("simulate.kind")?;
        let weeks = v.parse("simulate.weeks")?.unwrap_or(DEFAULT_WEEKS);
        let bars = v.parse("simulate.bars")?.unwrap_or(DEFAULT_SIM_BARS);

        Ok(RunConfig {
            inputs,
            asset: v.get("asset").unwrap_or("BTC").to_string(),
            p,
            force: v.flag("estimate.force")?.unwrap_or(false),
            se_mode,
            impulse,
            horizons,
            anchor,
            min_rows: v.parse("panel.min_rows")?.unwrap_or(DEFAULT_MIN_WEEK_ROWS),
            unit_root_precheck: v.flag("panel.unit_root_precheck")?.unwrap_or(false),
            gain_basis,
            gain_timing,
            significance,
            fast_adjustment_floor,
            out: v.path("output.dir").unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            seed: v.parse("seed")?.unwrap_or(0),
            workers,
            kind,
            weeks,
            bars,
        })
    }

    /// Resolved analysis settings. Paths and the worker count are left out
    /// since neither changes any result.
    pub fn settings(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("asset", self.asset.clone());
        put("estimate.p", self.p.to_string());
        put("estimate.force", self.force.to_string());
        put("estimate.se_mode", format!("{:?}", self.se_mode).to_ascii_lowercase());
        put("impulse.shock_fraction", self.impulse.shock_fraction.to_string());
        put(
            "impulse.base_global_price",
            self.impulse.base_global_price.map_or_else(|| "sample_mean".into(), |b| b.to_string()),
        );
        put("impulse.global_dynamics", format!("{:?}", self.impulse.global_dynamics).to_ascii_lowercase());
        put("impulse.horizon_bars", self.impulse.horizon_bars.to_string());
        put(
            "horizons",
            self.horizons.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
        );
        put("panel.anchor", self.anchor.map_or_else(|| "auto".into(), |a| a.to_rfc3339()));
        put("panel.min_rows", self.min_rows.to_string());
        put("panel.unit_root_precheck", self.unit_root_precheck.to_string());
        put("panel.gain_basis", format!("{:?}", self.gain_basis));
        put("panel.gain_timing", format!("{:?}", self.gain_timing));
        put("classify.significance", self.significance.to_string());
        put("classify.fast_adjustment_floor", self.fast_adjustment_floor.to_string());
        put("seed", self.seed.to_string());
        put("simulate.kind", self.kind.map_or_else(|| "pair".into(), |k| k.as_str().to_string()));
        put("simulate.weeks", self.weeks.to_string());
        put("simulate.bars", self.bars.to_string());
        m
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.settings() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn panel_config(&self, anchor: DateTime<Utc>) -> PanelConfig {
        PanelConfig {
            p: self.p,
            impulse: self.impulse,
            horizons: self.horizons.clone(),
            min_rows: self.min_rows,
            workers: self.workers,
            se_mode: self.se_mode,
            gain_basis: self.gain_basis,
            gain_timing: self.gain_timing,
            unit_root_precheck: self.unit_root_precheck,
            asset: Some(self.asset.clone()),
            ..PanelConfig::new(anchor)
        }
    }

    pub fn require(&self, key: &str, path: &Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
        path.clone()
            .ok_or_else(|| CliError::config(format!("missing {key} (set it in the config or pass {flag})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn parses_comments_quotes_and_blank_lines() {
        let text = "# top\nestimate.p = 2\n\nasset = \"ETH\"  # trailing\n";
        let m = parse_config_text(text, None).unwrap();
        assert_eq!(m["estimate.p"], "2");
        assert_eq!(m["asset"], "ETH");
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert!(parse_config_text("estimate.q = 1", None).is_err());
        assert!(parse_config_text("seed = 1\nseed = 2", None).is_err());
        assert!(parse_config_text("seed 1", None).is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let m = parse_config_text("input.fx = fx.csv\noutput.dir = /abs", Some(Path::new("/cfg"))).unwrap();
        assert_eq!(m["input.fx"], "/cfg/fx.csv");
        assert_eq!(m["output.dir"], "/abs");
    }

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::resolve(&BTreeMap::new()).unwrap();
        assert_eq!(c.p, 3);
        assert_eq!(c.horizons.len(), 5);
        assert_eq!(c.impulse.shock_fraction, 0.30);
        assert!(!c.force);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for (k, v) in [
            ("estimate.p", "0"),
            ("estimate.p", "x"),
            ("horizons", "45m"),
            ("horizons", "7h"),
            ("panel.anchor", "2020-11-23T00:00:00Z"),
            ("classify.significance", "1.5"),
            ("workers", "0"),
            ("simulate.kind", "greed"),
            ("estimate.force", "maybe"),
        ] {
            let e = RunConfig::resolve(&map(&[(k, v)])).unwrap_err();
            assert_eq!(e.code(), 2, "{k}={v}");
        }
    }

    #[test]
    fn missing_input_file_names_the_path() {
        let e = RunConfig::resolve(&map(&[("input.fx", "/nonexistent/fx.csv")])).unwrap_err();
        assert_eq!(e.code(), 2);
        assert!(e.message.contains("/nonexistent/fx.csv"));
    }

    #[test]
    fn hash_ignores_paths_but_not_settings() {
        let a = RunConfig::resolve(&map(&[("output.dir", "a")])).unwrap();
        let b = RunConfig::resolve(&map(&[("output.dir", "b"), ("estimate.p", "3")])).unwrap();
        let c = RunConfig::resolve(&map(&[("estimate.p", "2")])).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
