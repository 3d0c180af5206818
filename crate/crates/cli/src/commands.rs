use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use quotelag_core::biaslab::{
    build_weekly_panel, classify_bias, rqv_regression, BiasVerdict, ClassifierConfig, Conditioning, RegressionError,
    RqvRegressionReport, WeeklyPanelRow,
};
use quotelag_core::econometrics::{
    engle_granger, estimate_vecm, two_sided_p, CoefficientRow, CointegrationFit, EgOptions, EquationFit, Estimate,
    VecmFit, VecmSystem,
};
use quotelag_core::impulse::{
    long_run_rqv, relative_quote_values, simulate_impulse, simulate_system, Horizon, ImpulseConfig, ImpulsePath,
};
use quotelag_core::ingest::{format_timestamp, write_fx_csv, write_quote_csv, write_trades_csv};
use quotelag_core::microstructure::{intraday_spread_profile, spread_regression, IntradayProfile, SpreadRegressionReport};
use quotelag_core::quotegrid::{grid_step, sunday_on_or_before, AlignedPair, Side};
use quotelag_core::synth::{gen_biased_scenario, gen_cointegrated_pair, GainPoint, ScenarioSpec, SynthSpec};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{load_pair, load_quotes, panel_csv, parse_panel_csv, read_input, FileSummary, Loaded, Outputs};

pub const TOOL: &str = "quotelag";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub settings: BTreeMap<String, String>,
    /// SHA-256 of each input file, keyed by role.
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &'static str, cfg: &RunConfig, inputs: BTreeMap<String, String>) -> Self {
        Provenance {
            tool: TOOL,
            version: VERSION,
            command,
            config_hash: cfg.hash(),
            settings: cfg.settings(),
            inputs,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleInfo {
    pub aligned_rows: usize,
    pub rows_used: usize,
    pub first: Option<DateTime<Utc>>,
    pub last: Option<DateTime<Utc>>,
    pub dropped_local: usize,
    pub dropped_global: usize,
    pub files: BTreeMap<String, FileSummary>,
    pub notes: Vec<String>,
}

/// The longest gap-free stretch of the aligned sample.
fn full_sample(loaded: &Loaded) -> CliResult<(AlignedPair, SampleInfo)> {
    let pair = &loaded.pair;
    let mut notes = Vec::new();
    let used = if pair.is_contiguous() {
        pair.clone()
    } else {
        let r = pair.longest_contiguous();
        let msg = format!(
            "sample has {} gap-free stretches; using rows {}..{} of {}",
            pair.contiguous_segments().len(),
            r.start,
            r.end,
            pair.len()
        );
        log::warn!("{msg}");
        notes.push(msg);
        pair.slice(r)?
    };
    let info = SampleInfo {
        aligned_rows: pair.len(),
        rows_used: used.len(),
        first: used.grid().first().copied(),
        last: used.grid().last().copied(),
        dropped_local: loaded.dropped_local,
        dropped_global: loaded.dropped_global,
        files: loaded.files.clone(),
        notes,
    };
    Ok((used, info))
}

fn fit_side(pair: &AlignedPair, side: Side, cfg: &RunConfig) -> CliResult<(CointegrationFit, VecmFit)> {
    let pa = pair.local_quotes(side);
    let pb = pair.global_quotes(side);
    let opts = EgOptions { force: cfg.force, ..EgOptions::default() };
    let coint = engle_granger(&pa, &pb, &opts).map_err(|e| CliError::from(e).context(format!("{side} cointegration")))?;
    if let Some(d) = &coint.degenerate {
        log::warn!("{side}: {d}");
    }
    let fit = estimate_vecm(pair, side, cfg.p, &coint, cfg.se_mode)
        .map_err(|e| CliError::from(e).context(format!("{side} VECM")))?;
    Ok((coint, fit))
}

#[derive(Debug, Clone, Serialize)]
pub struct EquationReport {
    pub coefficients: Vec<CoefficientRow>,
    pub residual_variance: f64,
    pub r_squared: f64,
    pub n_obs: usize,
}

impl EquationReport {
    pub fn new(eq: &EquationFit) -> Self {
        let p = eq.local_lags.len();
        let dof = eq.n_obs.saturating_sub(2 * p + 2) as f64;
        let row = |name: String, e: &Estimate| CoefficientRow {
            name,
            coefficient: e.value,
            std_error: e.std_error,
            t_stat: e.t_stat(),
            p_value: two_sided_p(e.t_stat(), dof),
        };
        let mut coefficients = vec![row("constant".into(), &eq.constant), row("ec_lag1".into(), &eq.alpha)];
        coefficients.extend(eq.local_lags.iter().enumerate().map(|(k, e)| row(format!("local_diff_lag{}", k + 1), e)));
        coefficients.extend(eq.global_lags.iter().enumerate().map(|(k, e)| row(format!("global_diff_lag{}", k + 1), e)));
        EquationReport {
            coefficients,
            residual_variance: eq.residual_variance,
            r_squared: eq.r_squared,
            n_obs: eq.n_obs,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SideEstimate {
    pub side: Side,
    pub lag_order: usize,
    pub cointegration: CointegrationFit,
    pub local_equation: EquationReport,
    pub global_equation: EquationReport,
    pub global_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub provenance: Provenance,
    pub sample: SampleInfo,
    pub sides: Vec<SideEstimate>,
}

fn estimate_sides(cfg: &RunConfig, loaded: &Loaded) -> CliResult<(SampleInfo, Vec<(SideEstimate, VecmFit)>)> {
    let (pair, info) = full_sample(loaded)?;
    let mut sides = Vec::new();
    for side in Side::BOTH {
        let (coint, fit) = fit_side(&pair, side, cfg)?;
        log::info!("{side}: beta1 {:.6}, local alpha {:.6}", coint.beta1, fit.local.alpha.value);
        sides.push((
            SideEstimate {
                side,
                lag_order: fit.lag_order,
                cointegration: coint,
                local_equation: EquationReport::new(&fit.local),
                global_equation: EquationReport::new(&fit.global),
                global_mean: fit.global_mean,
            },
            fit,
        ));
    }
    Ok((info, sides))
}

pub fn cmd_estimate(cfg: &RunConfig) -> CliResult<Outputs> {
    let loaded = load_pair(cfg, false)?;
    let (sample, sides) = estimate_sides(cfg, &loaded)?;
    let report = EstimateReport {
        provenance: Provenance::new("estimate", cfg, loaded.digests.clone()),
        sample,
        sides: sides.into_iter().map(|(s, _)| s).collect(),
    };
    let mut out = Outputs::default();
    out.add_json("estimate.json", &report)?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ImpulseSide {
    pub label: String,
    pub base_global_price: f64,
    pub shocked_level: f64,
    pub first_response_bar: usize,
    pub rqv: BTreeMap<Horizon, f64>,
    pub long_run_rqv: Option<f64>,
    pub system: VecmSystem,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImpulseReport {
    pub provenance: Provenance,
    pub impulse: ImpulseConfig,
    pub sides: Vec<ImpulseSide>,
}

fn impulse_side(label: &str, path: &ImpulsePath, cfg: &RunConfig) -> CliResult<ImpulseSide> {
    Ok(ImpulseSide {
        label: label.to_string(),
        base_global_price: path.base_global_price,
        shocked_level: path.shocked_level,
        first_response_bar: path.first_response_bar(),
        rqv: relative_quote_values(path, &cfg.horizons)?,
        long_run_rqv: long_run_rqv(&path.system, &path.config, path.base_global_price),
        system: path.system.clone(),
    })
}

fn path_csv(path: &ImpulsePath) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    Ok(buf)
}

pub fn cmd_impulse(cfg: &RunConfig) -> CliResult<Outputs> {
    let mut out = Outputs::default();
    let mut sides = Vec::new();
    let digests;
    if let Some(sys_path) = &cfg.inputs.system {
        let input = read_input(sys_path)?;
        let system: VecmSystem = serde_json::from_slice(&input.bytes)
            .map_err(|e| CliError::data(format!("{}: {e}", sys_path.display())))?;
        system.validate().map_err(|e| CliError::data(format!("{}: {e}", sys_path.display())))?;
        let base = cfg.impulse.base_global_price.ok_or_else(|| {
            CliError::config("impulse.base_global_price is required with input.system")
        })?;
        let path = simulate_system(&system, &cfg.impulse, base)?;
        out.add("impulse_path_system.csv", path_csv(&path)?);
        sides.push(impulse_side("system", &path, cfg)?);
        digests = BTreeMap::from([("system".to_string(), input.sha256)]);
    } else {
        let loaded = load_pair(cfg, false)?;
        let (_, fits) = estimate_sides(cfg, &loaded)?;
        for (s, fit) in &fits {
            let path = simulate_impulse(fit, &cfg.impulse).map_err(|e| CliError::from(e).context(s.side))?;
            out.add(format!("impulse_path_{}.csv", s.side), path_csv(&path)?);
            sides.push(impulse_side(s.side.as_str(), &path, cfg)?);
        }
        digests = loaded.digests;
    }
    let report = ImpulseReport {
        provenance: Provenance::new("impulse", cfg, digests),
        impulse: cfg.impulse,
        sides,
    };
    out.add_json("impulse.json", &report)?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct HorizonSummary {
    pub side: Side,
    pub horizon: Horizon,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize_panel(rows: &[WeeklyPanelRow], horizons: &[Horizon]) -> Vec<HorizonSummary> {
    let mut out = Vec::new();
    for side in Side::BOTH {
        for &h in horizons {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.side == side && r.estimation_ok)
                .filter_map(|r| r.rqv.get(&h).copied())
                .collect();
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                f64::NAN
            };
            out.push(HorizonSummary {
                side,
                horizon: h,
                n,
                mean,
                sd,
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    out
}

fn summary_csv(s: &[HorizonSummary]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::internal(format!("csv: {e}"));
    w.write_record(["side", "horizon", "n", "mean", "sd", "min", "max"]).map_err(err)?;
    for r in s {
        let f = |x: f64| if x.is_finite() { x.to_string() } else { String::new() };
        w.write_record([
            r.side.to_string(),
            r.horizon.to_string(),
            r.n.to_string(),
            f(r.mean),
            f(r.sd),
            f(r.min),
            f(r.max),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::internal(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct PanelReport {
    pub provenance: Provenance,
    pub anchor: DateTime<Utc>,
    pub weeks: usize,
    pub rows: usize,
    pub estimation_failures: usize,
    pub partial_weeks: usize,
    pub has_gain_proportion: bool,
    pub summary: Vec<HorizonSummary>,
}

fn default_anchor(pair: &AlignedPair) -> CliResult<DateTime<Utc>> {
    let first = pair.grid().first().copied().ok_or_else(|| CliError::data("aligned sample is empty"))?;
    // Labels mark interval ends, so the first bar covers the half hour before it.
    Ok(sunday_on_or_before(first - grid_step()))
}

fn build_panel(cfg: &RunConfig) -> CliResult<(Vec<WeeklyPanelRow>, DateTime<Utc>, BTreeMap<String, String>)> {
    let loaded = load_pair(cfg, true)?;
    let anchor = match cfg.anchor {
        Some(a) => a,
        None => default_anchor(&loaded.pair)?,
    };
    let panel_cfg = cfg.panel_config(anchor);
    let rows = build_weekly_panel(&loaded.pair, loaded.trades.as_deref(), &panel_cfg)?;
    let failed = rows.iter().filter(|r| !r.estimation_ok).count();
    if failed > 0 {
        log::warn!("{failed} of {} weekly estimations failed; kept and flagged", rows.len());
    }
    Ok((rows, anchor, loaded.digests))
}

pub fn cmd_panel(cfg: &RunConfig) -> CliResult<Outputs> {
    let (rows, anchor, digests) = build_panel(cfg)?;
    let summary = summarize_panel(&rows, &cfg.horizons);
    let mut out = Outputs::default();
    out.add("panel.csv", panel_csv(&rows, &cfg.horizons)?);
    out.add("panel_summary.csv", summary_csv(&summary)?);
    let report = PanelReport {
        provenance: Provenance::new("panel", cfg, digests),
        anchor,
        weeks: rows.iter().map(|r| r.week_index).max().map_or(0, |w| w + 1),
        rows: rows.len(),
        estimation_failures: rows.iter().filter(|r| !r.estimation_ok).count(),
        partial_weeks: rows.iter().filter(|r| r.partial && r.side == Side::Bid).count(),
        has_gain_proportion: rows.iter().any(|r| r.pct_accounts_in_gain.is_some()),
        summary,
    };
    out.add_json("panel_report.json", &report)?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub provenance: Provenance,
    pub classifier: ClassifierConfig,
    pub conditionings: Vec<Conditioning>,
    pub verdicts: Vec<BiasVerdict>,
    pub regressions: Vec<RqvRegressionReport>,
    pub skipped: Vec<String>,
}

pub fn classify_panel(
    rows: &[WeeklyPanelRow],
    horizons: &[Horizon],
    classifier: &ClassifierConfig,
) -> CliResult<(Vec<Conditioning>, Vec<BiasVerdict>, Vec<RqvRegressionReport>, Vec<String>)> {
    let mut conds = vec![Conditioning::MarketReturns];
    if rows.iter().any(|r| r.pct_accounts_in_gain.is_some()) {
        conds.push(Conditioning::PctGain);
    } else {
        log::info!("no gain proportion in the panel; market-return conditioning only");
    }
    let mut verdicts = Vec::new();
    let mut regressions = Vec::new();
    let mut skipped = Vec::new();
    for &c in &conds {
        for side in Side::BOTH {
            for &h in horizons {
                match rqv_regression(rows, c, side, h) {
                    Ok(r) => {
                        verdicts.push(classify_bias(&r, classifier));
                        regressions.push(r);
                    }
                    Err(e @ RegressionError::InsufficientRows { .. }) => {
                        log::warn!("{e}");
                        skipped.push(e.to_string());
                    }
                    Err(e) => {
                        let msg = format!("{} {side} {h}: {e}", c.as_str());
                        log::warn!("{msg}");
                        skipped.push(msg);
                    }
                }
            }
        }
    }
    if verdicts.is_empty() {
        return Err(CliError::estimation(format!(
            "no regression could be run: {}",
            skipped.first().map_or("empty panel", String::as_str)
        )));
    }
    Ok((conds, verdicts, regressions, skipped))
}

pub fn cmd_classify(cfg: &RunConfig) -> CliResult<Outputs> {
    let (rows, digests) = match &cfg.inputs.panel {
        Some(path) => {
            let input = read_input(path)?;
            let rows = parse_panel_csv(&input.bytes).map_err(|e| e.context(path.display()))?;
            (rows, BTreeMap::from([("panel".to_string(), input.sha256)]))
        }
        None => {
            let (rows, _, d) = build_panel(cfg)?;
            (rows, d)
        }
    };
    let classifier = ClassifierConfig {
        significance: cfg.significance,
        fast_adjustment_floor: cfg.fast_adjustment_floor,
    };
    let (conditionings, verdicts, regressions, skipped) = classify_panel(&rows, &cfg.horizons, &classifier)?;
    let report = ClassifyReport {
        provenance: Provenance::new("classify", cfg, digests),
        classifier,
        conditionings,
        verdicts,
        regressions,
        skipped,
    };
    let mut out = Outputs::default();
    out.add_json("verdicts.json", &report)?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct VenueSpreads {
    pub venue: String,
    pub bars: usize,
    pub peak_slot: Option<usize>,
    pub overall_mean_spread: f64,
    pub regression: Option<SpreadRegressionReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpreadsReport {
    pub provenance: Provenance,
    pub venues: Vec<VenueSpreads>,
}

pub fn cmd_spreads(cfg: &RunConfig) -> CliResult<Outputs> {
    let local = cfg.require("input.local", &cfg.inputs.local, "--local")?;
    let mut digests = BTreeMap::new();
    let mut files = BTreeMap::new();
    let mut venues = vec![("local", local)];
    if let Some(g) = &cfg.inputs.global {
        venues.push(("global", g.clone()));
    }
    let mut out = Outputs::default();
    let mut reports = Vec::new();
    for (venue, path) in venues {
        let series = load_quotes(venue, &path, &cfg.asset, venue, &mut digests, &mut files)?;
        let profile: IntradayProfile = intraday_spread_profile(&series).map_err(|e| CliError::from(e).context(venue))?;
        let mut buf = Vec::new();
        profile.write_csv(&mut buf)?;
        out.add(format!("spread_profile_{venue}.csv"), buf);
        let (regression, error) = match spread_regression(&series) {
            Ok(r) => (Some(r), None),
            Err(e) if venue == "local" => return Err(CliError::from(e).context("local spread regression")),
            Err(e) => {
                log::warn!("{venue} spread regression: {e}");
                (None, Some(e.to_string()))
            }
        };
        reports.push(VenueSpreads {
            venue: venue.to_string(),
            bars: series.bar_count(),
            peak_slot: profile.peak_slot(),
            overall_mean_spread: profile.overall_mean(),
            regression,
            error,
        });
    }
    let report = SpreadsReport {
        provenance: Provenance::new("spreads", cfg, digests),
        venues: reports,
    };
    out.add_json("spread_regression.json", &report)?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct PairOracle<'a> {
    kind: &'static str,
    spec: &'a SynthSpec,
    system: VecmSystem,
}

#[derive(Debug, Clone, Serialize)]
struct Simulated<T: Serialize> {
    provenance: Provenance,
    oracle: T,
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), quotelag_core::ingest::IngestError>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::internal(e.to_string()))?;
    Ok(buf)
}

fn gain_path_csv(path: &[GainPoint]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::internal(format!("csv: {e}"));
    w.write_record(["timestamp", "holders", "in_gain", "pct_in_gain"]).map_err(err)?;
    for g in path {
        w.write_record([
            format_timestamp(g.timestamp),
            g.holders.to_string(),
            g.in_gain.to_string(),
            g.pct_in_gain.map_or_else(String::new, |x| x.to_string()),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::internal(e.to_string()))
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<Outputs> {
    let mut out = Outputs::default();
    let prov = Provenance::new("simulate", cfg, BTreeMap::new());
    match cfg.kind {
        Some(kind) => {
            let mut spec = ScenarioSpec::new(kind, cfg.weeks, cfg.seed);
            spec.pair.asset = cfg.asset.clone();
            let ds = gen_biased_scenario(&spec)?;
            out.add("local_quotes.csv", csv_bytes(|b| write_quote_csv(&ds.data.local_records, b))?);
            out.add("global_quotes.csv", csv_bytes(|b| write_quote_csv(&ds.data.global_records, b))?);
            out.add("fx.csv", csv_bytes(|b| write_fx_csv(&ds.data.fx, b))?);
            out.add("trades.csv", csv_bytes(|b| write_trades_csv(&ds.trades, b))?);
            out.add("gain_path.csv", gain_path_csv(&ds.oracle.gain_path)?);
            // The per-bar path lives in its own CSV.
            let mut oracle = serde_json::to_value(&ds.oracle).map_err(|e| CliError::internal(e.to_string()))?;
            if let Some(m) = oracle.as_object_mut() {
                m.remove("gain_path");
            }
            out.add_json("oracle.json", &Simulated { provenance: prov, oracle })?;
        }
        None => {
            let spec = SynthSpec {
                seed: cfg.seed,
                n_bars: cfg.bars,
                asset: cfg.asset.clone(),
                ..SynthSpec::default()
            };
            let ds = gen_cointegrated_pair(&spec)?;
            out.add("local_quotes.csv", csv_bytes(|b| write_quote_csv(&ds.local_records, b))?);
            out.add("global_quotes.csv", csv_bytes(|b| write_quote_csv(&ds.global_records, b))?);
            out.add("fx.csv", csv_bytes(|b| write_fx_csv(&ds.fx, b))?);
            let oracle = PairOracle { kind: "pair", spec: &ds.spec, system: ds.spec.system() };
            out.add_json("oracle.json", &Simulated { provenance: prov, oracle })?;
        }
    }
    Ok(out)
}
