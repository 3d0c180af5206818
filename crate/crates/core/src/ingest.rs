//! CSV ingestion for quotes, trades and FX rates; currency conversion and
//! resampling of raw quotes onto the 30-minute grid.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quotegrid::{grid_step, BarSeries, GridError, QuoteBar, GRID_MINUTES};

/// Default tolerated share of malformed data rows (0.1%).
pub const DEFAULT_MAX_MALFORMED: f64 = 0.001;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required column '{0}'")]
    MissingColumn(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("{bad} of {total} rows malformed (limit {limit}); first: {first}")]
    TooManyMalformed {
        bad: usize,
        total: usize,
        limit: f64,
        first: RowError,
    },
    #[error("no records to resample")]
    EmptyInput,
    #[error("no FX rate at or before first bar {0}")]
    FxCoverage(DateTime<Utc>),
    #[error("invalid FX series: {0}")]
    InvalidFx(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        IngestError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Records plus everything that was skipped on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub errors: Vec<RowError>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    pub max_malformed_fraction: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_malformed_fraction: DEFAULT_MAX_MALFORMED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawQuoteRecord {
    pub timestamp: DateTime<Utc>,
    pub bid: f64,
    pub offer: f64,
    pub last_trade_value: Option<f64>,
}

impl RawQuoteRecord {
    pub fn new(
        timestamp: DateTime<Utc>,
        bid: f64,
        offer: f64,
        last_trade_value: Option<f64>,
    ) -> Result<Self, String> {
        if !(bid.is_finite() && offer.is_finite()) || bid <= 0.0 {
            return Err(format!("bid {bid} must be positive"));
        }
        if offer < bid {
            return Err(format!("offer {offer} below bid {bid}"));
        }
        if let Some(v) = last_trade_value {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("traded value {v} is negative"));
            }
        }
        Ok(RawQuoteRecord {
            timestamp,
            bid,
            offer,
            last_trade_value,
        })
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.offer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TradeSide {
    Buy,
    Sell,
}

impl TradeSide {
    pub fn as_str(&self) -> &'static str {
        match self {
            TradeSide::Buy => "buy",
            TradeSide::Sell => "sell",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub timestamp: DateTime<Utc>,
    pub account_id: String,
    pub asset: String,
    pub side: TradeSide,
    pub quantity: f64,
    pub price: f64,
}

/// Local currency per unit of quote currency, step function in time.
#[derive(Debug, Clone, PartialEq)]
pub struct FxRateSeries {
    points: Vec<(DateTime<Utc>, f64)>,
}

impl FxRateSeries {
    pub fn new(points: Vec<(DateTime<Utc>, f64)>) -> Result<Self, IngestError> {
        if points.is_empty() {
            return Err(IngestError::InvalidFx("no rates".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(IngestError::InvalidFx(format!(
                    "timestamps not increasing at {}",
                    w[1].0
                )));
            }
        }
        if let Some((ts, r)) = points.iter().find(|(_, r)| !r.is_finite() || *r <= 0.0) {
            return Err(IngestError::InvalidFx(format!("rate {r} at {ts}")));
        }
        Ok(FxRateSeries { points })
    }

    pub fn constant(from: DateTime<Utc>, rate: f64) -> Result<Self, IngestError> {
        Self::new(vec![(from, rate)])
    }

    pub fn points(&self) -> &[(DateTime<Utc>, f64)] {
        &self.points
    }

    /// Most recent rate at or before `ts`.
    pub fn rate_at(&self, ts: DateTime<Utc>) -> Option<f64> {
        let idx = self.points.partition_point(|(t, _)| *t <= ts);
        (idx > 0).then(|| self.points[idx - 1].1)
    }
}

/// Column names for the quote file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuoteSchema {
    pub timestamp: String,
    pub bid: String,
    pub offer: String,
    /// `None` when the file carries no traded value.
    pub traded_value: Option<String>,
}

impl Default for QuoteSchema {
    fn default() -> Self {
        QuoteSchema {
            timestamp: "timestamp".into(),
            bid: "bid".into(),
            offer: "offer".into(),
            traded_value: Some("traded_value".into()),
        }
    }
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("bad timestamp '{s}': {e}"))
}

pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, false)
}

fn parse_num(field: &str, name: &str) -> Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("bad {name} '{field}'"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite {name}"))
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
}

fn finish<T>(
    records: Vec<T>,
    errors: Vec<RowError>,
    opts: &ParseOptions,
    what: &str,
) -> Result<Parsed<T>, IngestError> {
    let total = records.len() + errors.len();
    let mut warnings = Vec::new();
    if total == 0 {
        log::warn!("{what} file has a header but no rows");
        warnings.push(format!("{what} file has no data rows"));
        return Ok(Parsed {
            records,
            errors,
            warnings,
        });
    }
    if errors.len() as f64 > opts.max_malformed_fraction * total as f64 {
        return Err(IngestError::TooManyMalformed {
            bad: errors.len(),
            total,
            limit: opts.max_malformed_fraction,
            first: errors[0].clone(),
        });
    }
    if !errors.is_empty() {
        log::warn!("{what}: skipped {} malformed rows", errors.len());
        warnings.push(format!("{} malformed rows skipped", errors.len()));
    }
    Ok(Parsed {
        records,
        errors,
        warnings,
    })
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source)
}

pub fn parse_quote_csv<R: Read>(
    source: R,
    schema: &QuoteSchema,
    opts: &ParseOptions,
) -> Result<Parsed<RawQuoteRecord>, IngestError> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    let ts_i = column(&headers, &schema.timestamp)?;
    let bid_i = column(&headers, &schema.bid)?;
    let offer_i = column(&headers, &schema.offer)?;
    let tv_i = schema
        .traded_value
        .as_deref()
        .map(|n| column(&headers, n))
        .transpose()?;

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let parsed = (|| {
            let get = |i: usize| row.get(i).ok_or_else(|| "short row".to_string());
            let ts = parse_timestamp(get(ts_i)?)?;
            let bid = parse_num(get(bid_i)?, "bid")?;
            let offer = parse_num(get(offer_i)?, "offer")?;
            let tv = match tv_i {
                Some(i) => {
                    let f = get(i)?;
                    if f.trim().is_empty() {
                        None
                    } else {
                        Some(parse_num(f, "traded_value")?)
                    }
                }
                None => None,
            };
            RawQuoteRecord::new(ts, bid, offer, tv)
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(message) => errors.push(RowError {
                line: line_of(&row),
                message,
            }),
        }
    }
    finish(records, errors, opts, "quote")
}

pub fn parse_trades_csv<R: Read>(
    source: R,
    opts: &ParseOptions,
) -> Result<Parsed<TradeRecord>, IngestError> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = ["timestamp", "account_id", "asset", "side", "quantity", "price"]
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<_, _>>()?;

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let parsed = (|| {
            let get = |k: usize| row.get(idx[k]).ok_or_else(|| "short row".to_string());
            let timestamp = parse_timestamp(get(0)?)?;
            let account_id = get(1)?.trim().to_string();
            if account_id.is_empty() {
                return Err("empty account_id".to_string());
            }
            let asset = get(2)?.trim().to_string();
            let side = match get(3)?.trim().to_ascii_lowercase().as_str() {
                "buy" => TradeSide::Buy,
                "sell" => TradeSide::Sell,
                other => return Err(format!("side '{other}' is not buy or sell")),
            };
            let quantity = parse_num(get(4)?, "quantity")?;
            let price = parse_num(get(5)?, "price")?;
            if quantity <= 0.0 {
                return Err(format!("quantity {quantity} must be positive"));
            }
            if price <= 0.0 {
                return Err(format!("price {price} must be positive"));
            }
            Ok(TradeRecord {
                timestamp,
                account_id,
                asset,
                side,
                quantity,
                price,
            })
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(message) => errors.push(RowError {
                line: line_of(&row),
                message,
            }),
        }
    }
    finish(records, errors, opts, "trade")
}

pub fn parse_fx_csv<R: Read>(source: R, opts: &ParseOptions) -> Result<FxRateSeries, IngestError> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    let ts_i = column(&headers, "timestamp")?;
    let rate_i = column(&headers, "rate")?;
    let mut points = Vec::new();
    let mut errors = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let parsed = (|| {
            let ts = parse_timestamp(row.get(ts_i).ok_or("short row")?)?;
            let rate = parse_num(row.get(rate_i).ok_or("short row")?, "rate")?;
            if rate <= 0.0 {
                return Err(format!("rate {rate} must be positive"));
            }
            Ok((ts, rate))
        })();
        match parsed {
            Ok(p) => points.push(p),
            Err(message) => errors.push(RowError {
                line: line_of(&row),
                message,
            }),
        }
    }
    let parsed = finish(points, errors, opts, "fx")?;
    FxRateSeries::new(parsed.records)
}

pub fn write_quote_csv<W: Write>(records: &[RawQuoteRecord], sink: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["timestamp", "bid", "offer", "traded_value"])?;
    for r in records {
        w.write_record([
            format_timestamp(r.timestamp),
            r.bid.to_string(),
            r.offer.to_string(),
            r.last_trade_value.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trades_csv<W: Write>(trades: &[TradeRecord], sink: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["timestamp", "account_id", "asset", "side", "quantity", "price"])?;
    for t in trades {
        w.write_record([
            format_timestamp(t.timestamp),
            t.account_id.clone(),
            t.asset.clone(),
            t.side.as_str().to_string(),
            t.quantity.to_string(),
            t.price.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fx_csv<W: Write>(fx: &FxRateSeries, sink: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["timestamp", "rate"])?;
    for (ts, r) in fx.points() {
        w.write_record([format_timestamp(*ts), r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Multiply every price field and the traded value by the prevailing FX rate.
pub fn fx_convert(series: &BarSeries, fx: &FxRateSeries) -> Result<BarSeries, IngestError> {
    let first = series.bars().next().ok_or(GridError::EmptySeries)?.timestamp;
    if fx.rate_at(first).is_none() {
        return Err(IngestError::FxCoverage(first));
    }
    let converted = series.map_bars(|b| {
        let rate = fx.rate_at(b.timestamp).expect("covered from first bar on");
        b.scaled(rate)
    })?;
    Ok(converted.with_venue(format!("{} (converted)", series.venue)))
}

/// End label of the 30-minute interval containing `ts`; interval is `(end - 30m, end]`.
pub fn bucket_end(ts: DateTime<Utc>) -> DateTime<Utc> {
    let step = GRID_MINUTES * 60;
    let secs = ts.timestamp();
    let on_boundary = secs.rem_euclid(step) == 0 && ts.timestamp_subsec_nanos() == 0;
    let end = if on_boundary {
        secs
    } else {
        (secs.div_euclid(step) + 1) * step
    };
    DateTime::from_timestamp(end, 0).expect("in range")
}

/// Collapse raw quotes into 30-minute bars.
///
/// The bar quote is the last quote in the bucket, mid OHLC follows the mid path
/// inside it and traded value is summed. Empty buckets become gaps.
pub fn resample_30m(
    records: &[RawQuoteRecord],
    asset: &str,
    venue: &str,
) -> Result<BarSeries, IngestError> {
    if records.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let sorted;
    let records = if records.windows(2).all(|w| w[0].timestamp <= w[1].timestamp) {
        records
    } else {
        let mut v = records.to_vec();
        v.sort_by_key(|r| r.timestamp);
        sorted = v;
        &sorted[..]
    };

    let mut bars = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let end = bucket_end(records[i].timestamp);
        let mut j = i;
        while j < records.len() && bucket_end(records[j].timestamp) == end {
            j += 1;
        }
        let bucket = &records[i..j];
        let first_mid = bucket[0].mid();
        let (mut high, mut low) = (first_mid, first_mid);
        let mut traded = 0.0;
        for r in bucket {
            let m = r.mid();
            high = high.max(m);
            low = low.min(m);
            traded += r.last_trade_value.unwrap_or(0.0);
        }
        let last = bucket[bucket.len() - 1];
        bars.push(QuoteBar::new(
            end,
            last.bid,
            last.offer,
            first_mid,
            high,
            low,
            last.mid(),
            traded,
        )?);
        i = j;
    }
    Ok(BarSeries::from_bars(asset, venue, grid_step(), bars)?)
}

/// Raw records grouped by bucket end; reference for resampling checks.
pub fn group_by_bucket(
    records: &[RawQuoteRecord],
) -> BTreeMap<DateTime<Utc>, Vec<RawQuoteRecord>> {
    let mut map: BTreeMap<_, Vec<_>> = BTreeMap::new();
    for r in records {
        map.entry(bucket_end(r.timestamp)).or_default().push(*r);
    }
    map
}
