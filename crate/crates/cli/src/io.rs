use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use quotelag_core::biaslab::WeeklyPanelRow;
use quotelag_core::impulse::Horizon;
use quotelag_core::ingest::{
    format_timestamp, fx_convert, parse_fx_csv, parse_quote_csv, parse_timestamp, parse_trades_csv, resample_30m,
    FxRateSeries, IngestError, ParseOptions, Parsed, QuoteSchema, RawQuoteRecord, RowError, TradeRecord,
};
use quotelag_core::quotegrid::{align_pair, AlignedPair, BarSeries, Side};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const LOCAL_VENUE: &str = "local";
pub const GLOBAL_VENUE: &str = "global";

/// Raw bytes of an input file and their SHA-256.
pub struct Input {
    pub bytes: Vec<u8>,
    pub sha256: String,
}

pub fn read_input(path: &Path) -> CliResult<Input> {
    let bytes = fs::read(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    Ok(Input { bytes, sha256 })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileSummary {
    pub rows: usize,
    pub rejected: usize,
    pub first_errors: Vec<RowError>,
}

impl FileSummary {
    fn of<T>(p: &Parsed<T>) -> Self {
        FileSummary {
            rows: p.records.len(),
            rejected: p.errors.len(),
            first_errors: p.errors.iter().take(5).cloned().collect(),
        }
    }
}

fn note<T>(what: &str, path: &Path, p: &Parsed<T>) {
    for w in &p.warnings {
        log::warn!("{what} {}: {w}", path.display());
    }
    for e in p.errors.iter().take(5) {
        log::warn!("{what} {}: rejected {e}", path.display());
    }
}

/// Quote files may omit the traded value column.
pub fn parse_quotes(bytes: &[u8]) -> Result<Parsed<RawQuoteRecord>, IngestError> {
    let opts = ParseOptions::default();
    match parse_quote_csv(bytes, &QuoteSchema::default(), &opts) {
        Err(IngestError::MissingColumn(c)) if c == "traded_value" => {
            parse_quote_csv(bytes, &QuoteSchema { traded_value: None, ..QuoteSchema::default() }, &opts)
        }
        other => other,
    }
}

pub fn load_quotes(
    key: &str,
    path: &Path,
    asset: &str,
    venue: &str,
    digests: &mut BTreeMap<String, String>,
    summaries: &mut BTreeMap<String, FileSummary>,
) -> CliResult<BarSeries> {
    let input = read_input(path)?;
    digests.insert(key.to_string(), input.sha256);
    let parsed = parse_quotes(&input.bytes).map_err(|e| CliError::from(e).context(path.display()))?;
    note("quotes", path, &parsed);
    summaries.insert(key.to_string(), FileSummary::of(&parsed));
    resample_30m(&parsed.records, asset, venue).map_err(|e| CliError::from(e).context(path.display()))
}

pub struct Loaded {
    pub pair: AlignedPair,
    pub trades: Option<Vec<TradeRecord>>,
    pub digests: BTreeMap<String, String>,
    pub files: BTreeMap<String, FileSummary>,
    pub dropped_local: usize,
    pub dropped_global: usize,
}

/// Read both quote legs, convert the global one with the FX file and align.
pub fn load_pair(cfg: &RunConfig, with_trades: bool) -> CliResult<Loaded> {
    let local_path = cfg.require("input.local", &cfg.inputs.local, "--local")?;
    let global_path = cfg.require("input.global", &cfg.inputs.global, "--global")?;
    let fx_path = cfg.require("input.fx", &cfg.inputs.fx, "--fx")?;
    let mut digests = BTreeMap::new();
    let mut files = BTreeMap::new();

    let fx_input = read_input(&fx_path)?;
    digests.insert("fx".to_string(), fx_input.sha256.clone());
    let fx: FxRateSeries = parse_fx_csv(fx_input.bytes.as_slice(), &ParseOptions::default())
        .map_err(|e| CliError::from(e).context(fx_path.display()))?;

    let local = load_quotes("local", &local_path, &cfg.asset, LOCAL_VENUE, &mut digests, &mut files)?;
    let global = load_quotes("global", &global_path, &cfg.asset, GLOBAL_VENUE, &mut digests, &mut files)?;
    let global = fx_convert(&global, &fx).map_err(|e| CliError::from(e).context(fx_path.display()))?;
    let aligned = align_pair(&local, &global)?;

    let trades = match (&cfg.inputs.trades, with_trades) {
        (Some(path), true) => {
            let input = read_input(path)?;
            digests.insert("trades".to_string(), input.sha256);
            let parsed = parse_trades_csv(input.bytes.as_slice(), &ParseOptions::default())
                .map_err(|e| CliError::from(e).context(path.display()))?;
            note("trades", path, &parsed);
            files.insert("trades".to_string(), FileSummary::of(&parsed));
            Some(parsed.records)
        }
        _ => None,
    };
    Ok(Loaded {
        pair: aligned.pair,
        trades,
        digests,
        files,
        dropped_local: aligned.dropped_local,
        dropped_global: aligned.dropped_global,
    })
}

/// Files produced by a command, written only once everything succeeded.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::internal(format!("{name}: {e}")))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Temp file then rename, one file at a time.
    pub fn commit(self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| CliError::internal(format!("cannot create {}: {e}", dir.display())))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let target = dir.join(&name);
            let tmp = dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, &bytes)
                .and_then(|_| fs::rename(&tmp, &target))
                .map_err(|e| {
                    let _ = fs::remove_file(&tmp);
                    CliError::internal(format!("cannot write {}: {e}", target.display()))
                })?;
            written.push(target);
        }
        Ok(written)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Panel rows as CSV. The gain column exists only when some row has a value.
pub fn panel_csv(rows: &[WeeklyPanelRow], horizons: &[Horizon]) -> CliResult<Vec<u8>> {
    let with_pct = rows.iter().any(|r| r.pct_accounts_in_gain.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "week_index",
        "week_start",
        "side",
        "rows",
        "rows_used",
        "partial",
        "estimation_ok",
        "cointegrated_5pct",
        "alpha_local",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(horizons.iter().map(|h| format!("rqv_{h}")));
    header.extend(["weekly_return", "ln_traded_value", "weekly_volatility"].map(String::from));
    if with_pct {
        header.push("pct_accounts_in_gain".into());
    }
    header.push("diagnostics".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.week_index.to_string(),
            format_timestamp(r.week_start),
            r.side.to_string(),
            r.rows.to_string(),
            r.rows_used.to_string(),
            r.partial.to_string(),
            r.estimation_ok.to_string(),
            r.cointegrated_5pct.map_or_else(String::new, |b| b.to_string()),
            opt(r.alpha_local),
        ];
        rec.extend(horizons.iter().map(|h| opt(r.rqv.get(h).copied())));
        rec.extend([opt(r.weekly_return), opt(r.ln_traded_value), opt(r.weekly_volatility)]);
        if with_pct {
            rec.push(opt(r.pct_accounts_in_gain));
        }
        rec.push(r.diagnostics.join("; "));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::internal(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::internal(format!("csv: {e}"))
}

/// Read a panel CSV written by [`panel_csv`].
pub fn parse_panel_csv(bytes: &[u8]) -> CliResult<Vec<WeeklyPanelRow>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let headers = rdr.headers().map_err(|e| CliError::data(format!("panel csv: {e}")))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| CliError::data(format!("panel csv: missing column '{name}'")));
    let week_index = need("week_index")?;
    let week_start = need("week_start")?;
    let side = need("side")?;
    let rows_c = need("rows")?;
    let rows_used = need("rows_used")?;
    let partial = need("partial")?;
    let ok = need("estimation_ok")?;
    let coint = need("cointegrated_5pct")?;
    let alpha = need("alpha_local")?;
    let ret = need("weekly_return")?;
    let tv = need("ln_traded_value")?;
    let vol = need("weekly_volatility")?;
    let pct = col("pct_accounts_in_gain");
    let diag = col("diagnostics");
    let mut rqv_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if let Some(tag) = h.strip_prefix("rqv_") {
            let hz: Horizon = tag.parse().map_err(|e| CliError::data(format!("panel csv column {h}: {e}")))?;
            rqv_cols.push((i, hz));
        }
    }

    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| CliError::data(format!("panel csv line {line}: {e}")))?;
        let bad = |what: &str| CliError::data(format!("panel csv line {line}: bad {what}"));
        let num = |i: usize| -> CliResult<Option<f64>> {
            let s = rec.get(i).unwrap_or("").trim();
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|_| bad(&headers[i]))
            }
        };
        let int = |i: usize| rec.get(i).unwrap_or("").trim().parse::<usize>().map_err(|_| bad(&headers[i]));
        let boolean = |i: usize| rec.get(i).unwrap_or("").trim().parse::<bool>().map_err(|_| bad(&headers[i]));
        let mut rqv = std::collections::BTreeMap::new();
        for &(i, hz) in &rqv_cols {
            if let Some(x) = num(i)? {
                rqv.insert(hz, x);
            }
        }
        let cointegrated_5pct = match rec.get(coint).unwrap_or("").trim() {
            "" => None,
            s => Some(s.parse::<bool>().map_err(|_| bad("cointegrated_5pct"))?),
        };
        out.push(WeeklyPanelRow {
            week_index: int(week_index)?,
            week_start: parse_timestamp(rec.get(week_start).unwrap_or("")).map_err(|_| bad("week_start"))?,
            side: rec.get(side).unwrap_or("").parse::<Side>().map_err(|_| bad("side"))?,
            rows: int(rows_c)?,
            rows_used: int(rows_used)?,
            partial: boolean(partial)?,
            rqv,
            weekly_return: num(ret)?,
            ln_traded_value: num(tv)?,
            weekly_volatility: num(vol)?,
            pct_accounts_in_gain: match pct {
                Some(i) => num(i)?,
                None => None,
            },
            estimation_ok: boolean(ok)?,
            cointegrated_5pct,
            alpha_local: num(alpha)?,
            diagnostics: diag
                .and_then(|i| rec.get(i))
                .filter(|s| !s.is_empty())
                .map(|s| s.split("; ").map(String::from).collect())
                .unwrap_or_default(),
        });
    }
    Ok(out)
}
