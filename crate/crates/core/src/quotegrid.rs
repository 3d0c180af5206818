//! Time-grid data model: validated 30-minute quote bars, two-venue alignment
//! and Sunday-anchored week slicing.
//!
//! Bars are labeled by the END of their interval: a bar stamped `t` holds the
//! quote state as of `t` and covers `(t - 30m, t]`.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use chrono::{DateTime, Datelike, Duration, Timelike, Utc, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minutes per grid interval.
pub const GRID_MINUTES: i64 = 30;

/// Rows in a complete week of 30-minute bars.
pub const BARS_PER_WEEK: usize = 336;

/// Default minimum row count for a week to be estimated.
pub const DEFAULT_MIN_WEEK_ROWS: usize = 200;

pub fn grid_step() -> Duration {
    Duration::minutes(GRID_MINUTES)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid bar at {timestamp}: {reason}")]
    InvalidBar {
        timestamp: DateTime<Utc>,
        reason: String,
    },
    #[error("timestamp {0} is not on the {1}-minute grid")]
    OffGrid(DateTime<Utc>, i64),
    #[error("timestamps not strictly increasing at {0}")]
    NotIncreasing(DateTime<Utc>),
    #[error("series is empty")]
    EmptySeries,
    #[error("grid steps differ: local {local} min, global {global} min")]
    MismatchedGridStep { local: i64, global: i64 },
    #[error("no common timestamps between local and global series")]
    EmptyIntersection,
    #[error("aligned legs disagree: {0}")]
    Misaligned(String),
    #[error("week anchor {0} is not a Sunday 00:00 UTC")]
    AnchorNotSundayMidnight(DateTime<Utc>),
    #[error("week anchor {anchor} is after the first row covering {first}")]
    AnchorAfterFirstRow {
        anchor: DateTime<Utc>,
        first: DateTime<Utc>,
    },
}

impl GridError {
    /// True for errors caused by configuration rather than by the data itself.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            GridError::MismatchedGridStep { .. }
                | GridError::AnchorNotSundayMidnight(_)
                | GridError::AnchorAfterFirstRow { .. }
        )
    }
}

/// Quote side used for estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Offer,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Bid, Side::Offer];

    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Bid => "bid",
            Side::Offer => "offer",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bid" => Ok(Side::Bid),
            "offer" | "ask" => Ok(Side::Offer),
            other => Err(format!("unknown side '{other}'")),
        }
    }
}

/// One 30-minute interval of a venue's quotes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteBar {
    pub timestamp: DateTime<Utc>,
    pub bid: f64,
    pub offer: f64,
    pub mid_open: f64,
    pub mid_high: f64,
    pub mid_low: f64,
    pub mid_close: f64,
    pub traded_value: f64,
}

impl QuoteBar {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        timestamp: DateTime<Utc>,
        bid: f64,
        offer: f64,
        mid_open: f64,
        mid_high: f64,
        mid_low: f64,
        mid_close: f64,
        traded_value: f64,
    ) -> Result<Self, GridError> {
        let bar = QuoteBar {
            timestamp,
            bid,
            offer,
            mid_open,
            mid_high,
            mid_low,
            mid_close,
            traded_value,
        };
        bar.validate()?;
        Ok(bar)
    }

    /// A bar whose OHLC all equal the quote midpoint.
    pub fn flat(
        timestamp: DateTime<Utc>,
        bid: f64,
        offer: f64,
        traded_value: f64,
    ) -> Result<Self, GridError> {
        let mid = 0.5 * (bid + offer);
        Self::new(timestamp, bid, offer, mid, mid, mid, mid, traded_value)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let fail = |reason: String| {
            Err(GridError::InvalidBar {
                timestamp: self.timestamp,
                reason,
            })
        };
        if !on_grid(self.timestamp, GRID_MINUTES) {
            return Err(GridError::OffGrid(self.timestamp, GRID_MINUTES));
        }
        let prices = [
            self.bid,
            self.offer,
            self.mid_open,
            self.mid_high,
            self.mid_low,
            self.mid_close,
        ];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return fail("prices must be finite and positive".into());
        }
        if self.offer < self.bid {
            return fail(format!("offer {} below bid {}", self.offer, self.bid));
        }
        if self.mid_low > self.mid_open.min(self.mid_close)
            || self.mid_high < self.mid_open.max(self.mid_close)
        {
            return fail("mid OHLC envelope violated".into());
        }
        if !self.traded_value.is_finite() || self.traded_value < 0.0 {
            return fail(format!("traded value {} is negative", self.traded_value));
        }
        Ok(())
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.offer)
    }

    pub fn quote(&self, side: Side) -> f64 {
        match side {
            Side::Bid => self.bid,
            Side::Offer => self.offer,
        }
    }

    /// Multiply every price and the traded value by `factor`.
    pub fn scaled(&self, factor: f64) -> QuoteBar {
        QuoteBar {
            timestamp: self.timestamp,
            bid: self.bid * factor,
            offer: self.offer * factor,
            mid_open: self.mid_open * factor,
            mid_high: self.mid_high * factor,
            mid_low: self.mid_low * factor,
            mid_close: self.mid_close * factor,
            traded_value: self.traded_value * factor,
        }
    }

    /// Index of the half-hour of the day (0..48) covered by this bar.
    pub fn half_hour_of_day(&self) -> usize {
        let start = self.timestamp - grid_step();
        (start.hour() * 2 + start.minute() / 30) as usize
    }
}

pub fn on_grid(ts: DateTime<Utc>, step_minutes: i64) -> bool {
    ts.timestamp().rem_euclid(step_minutes * 60) == 0 && ts.timestamp_subsec_nanos() == 0
}

/// A venue's bars on a uniform grid. Missing intervals are explicit `None` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct BarSeries {
    pub asset: String,
    pub venue: String,
    grid_step: Duration,
    start: DateTime<Utc>,
    slots: Vec<Option<QuoteBar>>,
}

impl BarSeries {
    /// Build from time-ordered bars; holes between bars become gap slots.
    pub fn from_bars(
        asset: impl Into<String>,
        venue: impl Into<String>,
        grid_step: Duration,
        bars: Vec<QuoteBar>,
    ) -> Result<Self, GridError> {
        let first = bars.first().ok_or(GridError::EmptySeries)?.timestamp;
        let step_min = grid_step.num_minutes();
        let mut slots: Vec<Option<QuoteBar>> = Vec::with_capacity(bars.len());
        let mut prev: Option<DateTime<Utc>> = None;
        for bar in bars {
            bar.validate()?;
            if !on_grid(bar.timestamp, step_min) {
                return Err(GridError::OffGrid(bar.timestamp, step_min));
            }
            if let Some(p) = prev {
                if bar.timestamp <= p {
                    return Err(GridError::NotIncreasing(bar.timestamp));
                }
                let holes = ((bar.timestamp - p).num_minutes() / step_min - 1) as usize;
                slots.extend(std::iter::repeat_n(None, holes));
            }
            prev = Some(bar.timestamp);
            slots.push(Some(bar));
        }
        Ok(BarSeries {
            asset: asset.into(),
            venue: venue.into(),
            grid_step,
            start: first,
            slots,
        })
    }

    /// Build from explicit slots starting at `start`. Trailing/leading gaps are kept.
    pub fn from_slots(
        asset: impl Into<String>,
        venue: impl Into<String>,
        grid_step: Duration,
        start: DateTime<Utc>,
        slots: Vec<Option<QuoteBar>>,
    ) -> Result<Self, GridError> {
        if slots.iter().all(Option::is_none) {
            return Err(GridError::EmptySeries);
        }
        let step_min = grid_step.num_minutes();
        if !on_grid(start, step_min) {
            return Err(GridError::OffGrid(start, step_min));
        }
        for (i, slot) in slots.iter().enumerate() {
            if let Some(bar) = slot {
                bar.validate()?;
                let expected = start + grid_step * i as i32;
                if bar.timestamp != expected {
                    return Err(GridError::OffGrid(bar.timestamp, step_min));
                }
            }
        }
        Ok(BarSeries {
            asset: asset.into(),
            venue: venue.into(),
            grid_step,
            start,
            slots,
        })
    }

    pub fn grid_step(&self) -> Duration {
        self.grid_step
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn slots(&self) -> &[Option<QuoteBar>] {
        &self.slots
    }

    pub fn slot_timestamp(&self, i: usize) -> DateTime<Utc> {
        self.start + self.grid_step * i as i32
    }

    /// Present bars, in time order.
    pub fn bars(&self) -> impl Iterator<Item = &QuoteBar> + '_ {
        self.slots.iter().flatten()
    }

    pub fn bar_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn gap_count(&self) -> usize {
        self.slots.len() - self.bar_count()
    }

    pub fn with_venue(mut self, venue: impl Into<String>) -> Self {
        self.venue = venue.into();
        self
    }

    /// Apply `f` to every present bar, keeping gaps in place.
    pub fn map_bars(&self, mut f: impl FnMut(&QuoteBar) -> QuoteBar) -> Result<Self, GridError> {
        let slots = self.slots.iter().map(|s| s.as_ref().map(&mut f)).collect();
        BarSeries::from_slots(
            self.asset.clone(),
            self.venue.clone(),
            self.grid_step,
            self.start,
            slots,
        )
    }
}

/// Two venues' bars on one shared, gap-free-by-construction timestamp list.
///
/// Rows are the intersection of present bars, so consecutive rows may still be
/// more than one grid step apart where either venue had an outage; see
/// [`AlignedPair::contiguous_segments`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub asset: String,
    pub local_venue: String,
    pub global_venue: String,
    grid_step: Duration,
    grid: Vec<DateTime<Utc>>,
    local: Vec<QuoteBar>,
    global: Vec<QuoteBar>,
}

impl AlignedPair {
    pub fn new(
        asset: impl Into<String>,
        local_venue: impl Into<String>,
        global_venue: impl Into<String>,
        grid_step: Duration,
        local: Vec<QuoteBar>,
        global: Vec<QuoteBar>,
    ) -> Result<Self, GridError> {
        if local.is_empty() || global.is_empty() {
            return Err(GridError::EmptySeries);
        }
        if local.len() != global.len() {
            return Err(GridError::Misaligned(format!(
                "lengths {} and {}",
                local.len(),
                global.len()
            )));
        }
        let mut grid = Vec::with_capacity(local.len());
        for (l, g) in local.iter().zip(&global) {
            if l.timestamp != g.timestamp {
                return Err(GridError::Misaligned(format!(
                    "{} vs {}",
                    l.timestamp, g.timestamp
                )));
            }
            if let Some(&prev) = grid.last() {
                if l.timestamp <= prev {
                    return Err(GridError::NotIncreasing(l.timestamp));
                }
            }
            grid.push(l.timestamp);
        }
        Ok(AlignedPair {
            asset: asset.into(),
            local_venue: local_venue.into(),
            global_venue: global_venue.into(),
            grid_step,
            grid,
            local,
            global,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn grid(&self) -> &[DateTime<Utc>] {
        &self.grid
    }

    pub fn grid_step(&self) -> Duration {
        self.grid_step
    }

    pub fn local(&self) -> &[QuoteBar] {
        &self.local
    }

    pub fn global(&self) -> &[QuoteBar] {
        &self.global
    }

    pub fn local_quotes(&self, side: Side) -> Vec<f64> {
        self.local.iter().map(|b| b.quote(side)).collect()
    }

    pub fn global_quotes(&self, side: Side) -> Vec<f64> {
        self.global.iter().map(|b| b.quote(side)).collect()
    }

    /// Owned copy of rows `range`.
    pub fn slice(&self, range: Range<usize>) -> Result<AlignedPair, GridError> {
        AlignedPair::new(
            self.asset.clone(),
            self.local_venue.clone(),
            self.global_venue.clone(),
            self.grid_step,
            self.local[range.clone()].to_vec(),
            self.global[range].to_vec(),
        )
    }

    /// Maximal row ranges in which consecutive rows are exactly one grid step apart.
    pub fn contiguous_segments(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut begin = 0;
        for i in 1..self.grid.len() {
            if self.grid[i] - self.grid[i - 1] != self.grid_step {
                out.push(begin..i);
                begin = i;
            }
        }
        if !self.grid.is_empty() {
            out.push(begin..self.grid.len());
        }
        out
    }

    /// The longest contiguous run; earliest wins ties.
    pub fn longest_contiguous(&self) -> Range<usize> {
        self.contiguous_segments()
            .into_iter()
            .fold(0..0, |best, r| if r.len() > best.len() { r } else { best })
    }

    pub fn is_contiguous(&self) -> bool {
        self.contiguous_segments().len() <= 1
    }

    pub fn local_series(&self) -> BarSeries {
        BarSeries::from_bars(
            self.asset.clone(),
            self.local_venue.clone(),
            self.grid_step,
            self.local.clone(),
        )
        .expect("aligned legs are valid series")
    }

    pub fn global_series(&self) -> BarSeries {
        BarSeries::from_bars(
            self.asset.clone(),
            self.global_venue.clone(),
            self.grid_step,
            self.global.clone(),
        )
        .expect("aligned legs are valid series")
    }
}

/// Result of [`align_pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub pair: AlignedPair,
    pub dropped_local: usize,
    pub dropped_global: usize,
}

/// Keep the timestamps where both venues have a bar.
pub fn align_pair(local: &BarSeries, global: &BarSeries) -> Result<Alignment, GridError> {
    if local.grid_step != global.grid_step {
        return Err(GridError::MismatchedGridStep {
            local: local.grid_step.num_minutes(),
            global: global.grid_step.num_minutes(),
        });
    }
    let mut l = local.bars().peekable();
    let mut g = global.bars().peekable();
    let (mut lv, mut gv) = (Vec::new(), Vec::new());
    let (mut dropped_local, mut dropped_global) = (0, 0);
    loop {
        match (l.peek(), g.peek()) {
            (Some(a), Some(b)) => {
                if a.timestamp == b.timestamp {
                    lv.push(*l.next().unwrap());
                    gv.push(*g.next().unwrap());
                } else if a.timestamp < b.timestamp {
                    l.next();
                    dropped_local += 1;
                } else {
                    g.next();
                    dropped_global += 1;
                }
            }
            (Some(_), None) => {
                l.next();
                dropped_local += 1;
            }
            (None, Some(_)) => {
                g.next();
                dropped_global += 1;
            }
            (None, None) => break,
        }
    }
    if lv.is_empty() {
        return Err(GridError::EmptyIntersection);
    }
    let pair = AlignedPair::new(
        local.asset.clone(),
        local.venue.clone(),
        global.venue.clone(),
        local.grid_step,
        lv,
        gv,
    )?;
    Ok(Alignment {
        pair,
        dropped_local,
        dropped_global,
    })
}

/// One Sunday-anchored week of rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeekWindow {
    pub index: usize,
    pub start: DateTime<Utc>,
    /// Row range into the sliced [`AlignedPair`].
    pub rows: Range<usize>,
    /// Fewer than a full week of rows.
    pub partial: bool,
    /// Row count meets the configured minimum.
    pub usable: bool,
}

impl WeekWindow {
    pub fn end(&self) -> DateTime<Utc> {
        self.start + Duration::days(7)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }
}

pub fn is_sunday_midnight(ts: DateTime<Utc>) -> bool {
    ts.weekday() == Weekday::Sun
        && ts.hour() == 0
        && ts.minute() == 0
        && ts.second() == 0
        && ts.timestamp_subsec_nanos() == 0
}

/// The latest Sunday 00:00 UTC at or before `ts`.
pub fn sunday_on_or_before(ts: DateTime<Utc>) -> DateTime<Utc> {
    let date = ts.date_naive();
    let back = date.weekday().num_days_from_sunday() as i64;
    (date - Duration::days(back))
        .and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
}

/// Partition rows into consecutive 7-day windows starting at `anchor`.
///
/// A row belongs to the week whose span covers its whole interval, i.e. labels
/// in `(start, start + 7d]`. Every week between the first and last row gets a
/// window, including empty ones.
pub fn slice_weeks(
    pair: &AlignedPair,
    anchor: DateTime<Utc>,
    min_rows: usize,
) -> Result<Vec<WeekWindow>, GridError> {
    if !is_sunday_midnight(anchor) {
        return Err(GridError::AnchorNotSundayMidnight(anchor));
    }
    let step = pair.grid_step;
    let first_cover = pair.grid[0] - step;
    if first_cover < anchor {
        return Err(GridError::AnchorAfterFirstRow {
            anchor,
            first: first_cover,
        });
    }
    let week = Duration::days(7);
    let week_of = |ts: DateTime<Utc>| ((ts - step - anchor).num_seconds() / week.num_seconds()) as usize;
    let full = (week.num_minutes() / step.num_minutes()) as usize;
    let last_week = week_of(*pair.grid.last().unwrap());

    let mut windows = Vec::with_capacity(last_week + 1);
    let mut row = 0;
    for index in week_of(pair.grid[0])..=last_week {
        let begin = row;
        while row < pair.grid.len() && week_of(pair.grid[row]) == index {
            row += 1;
        }
        let count = row - begin;
        windows.push(WeekWindow {
            index,
            start: anchor + week * index as i32,
            rows: begin..row,
            partial: count < full,
            usable: count >= min_rows,
        });
    }
    Ok(windows)
}

/// Distinct timestamps present in a series.
pub fn present_timestamps(series: &BarSeries) -> BTreeSet<DateTime<Utc>> {
    series.bars().map(|b| b.timestamp).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 11, 22, 0, 0, 0).unwrap()
    }

    fn bar_at(ts: DateTime<Utc>, px: f64) -> QuoteBar {
        QuoteBar::flat(ts, px - 1.0, px + 1.0, 10.0).unwrap()
    }

    fn series(venue: &str, range: Range<i32>) -> BarSeries {
        let bars = range
            .map(|i| bar_at(t0() + grid_step() * i, 100.0 + i as f64))
            .collect();
        BarSeries::from_bars("BTC", venue, grid_step(), bars).unwrap()
    }

    #[test]
    fn rejects_crossed_quotes_and_bad_envelope() {
        let ts = t0();
        assert!(QuoteBar::flat(ts, 101.0, 100.0, 0.0).is_err());
        assert!(QuoteBar::new(ts, 99.0, 101.0, 100.0, 100.5, 100.2, 100.0, 0.0).is_err());
        assert!(QuoteBar::flat(ts + Duration::minutes(10), 99.0, 101.0, 0.0).is_err());
        assert!(QuoteBar::flat(ts, 0.0, 101.0, 0.0).is_err());
    }

    #[test]
    fn half_hour_slot_uses_interval_start() {
        let b = bar_at(t0() + Duration::minutes(30), 100.0);
        assert_eq!(b.half_hour_of_day(), 0);
        let b = bar_at(t0() + Duration::hours(5) + Duration::minutes(30), 100.0);
        assert_eq!(b.half_hour_of_day(), 10);
        let b = bar_at(t0() + Duration::days(1), 100.0);
        assert_eq!(b.half_hour_of_day(), 47);
    }

    #[test]
    fn identical_series_align_fully() {
        let a = series("local", 1..11);
        let al = align_pair(&a, &a.clone().with_venue("global")).unwrap();
        assert_eq!(al.pair.len(), 10);
        assert_eq!((al.dropped_local, al.dropped_global), (0, 0));
    }

    #[test]
    fn overlapping_ranges_intersect() {
        let local = series("local", 1..11);
        let global = series("global", 3..13);
        let al = align_pair(&local, &global).unwrap();
        assert_eq!(al.pair.len(), 8);
        assert_eq!(al.pair.grid()[0], t0() + grid_step() * 3);
        assert_eq!((al.dropped_local, al.dropped_global), (2, 2));
    }

    #[test]
    fn gap_marker_excluded_matches_set_intersection() {
        let full = series("local", 1..11);
        let mut slots = full.slots().to_vec();
        slots[4] = None;
        let gapped =
            BarSeries::from_slots("BTC", "local", grid_step(), full.start(), slots).unwrap();
        assert_eq!(gapped.gap_count(), 1);
        let global = series("global", 1..11);
        let al = align_pair(&gapped, &global).unwrap();

        let expected: Vec<_> = present_timestamps(&gapped)
            .intersection(&present_timestamps(&global))
            .copied()
            .collect();
        assert_eq!(al.pair.grid(), expected.as_slice());
        assert_eq!(al.pair.len(), 9);
        assert_eq!(al.dropped_global, 1);
        assert_eq!(al.pair.contiguous_segments(), vec![0..4, 4..9]);
        assert_eq!(al.pair.longest_contiguous(), 4..9);
    }

    #[test]
    fn alignment_errors() {
        let a = series("local", 1..5);
        let b = series("global", 10..15);
        assert_eq!(align_pair(&a, &b).unwrap_err(), GridError::EmptyIntersection);

        let hourly: Vec<_> = (1..5)
            .map(|i| bar_at(t0() + Duration::hours(i), 100.0))
            .collect();
        let h = BarSeries::from_bars("BTC", "global", Duration::hours(1), hourly).unwrap();
        let err = align_pair(&a, &h).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn alignment_is_idempotent() {
        let local = series("local", 1..30);
        let global = series("global", 5..40);
        let once = align_pair(&local, &global).unwrap().pair;
        let twice = align_pair(&once.local_series(), &once.global_series())
            .unwrap()
            .pair;
        assert_eq!(once, twice);
    }

    fn pair_of(n: i32) -> AlignedPair {
        let s = series("local", 1..n + 1);
        align_pair(&s, &s.clone().with_venue("global")).unwrap().pair
    }

    #[test]
    fn one_full_week() {
        let pair = pair_of(336);
        let w = slice_weeks(&pair, t0(), DEFAULT_MIN_WEEK_ROWS).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].row_count(), 336);
        assert!(!w[0].partial && w[0].usable);
    }

    #[test]
    fn trailing_partial_week() {
        let pair = pair_of(340);
        let w = slice_weeks(&pair, t0(), DEFAULT_MIN_WEEK_ROWS).unwrap();
        // brute force: count rows per 7-day bucket of interval starts
        let mut counts = std::collections::BTreeMap::new();
        for ts in pair.grid() {
            let k = (*ts - grid_step() - t0()).num_days() / 7;
            *counts.entry(k).or_insert(0usize) += 1;
        }
        assert_eq!(counts.values().copied().collect::<Vec<_>>(), vec![336, 4]);
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].row_count(), 336);
        assert_eq!(w[1].row_count(), 4);
        assert!(w[1].partial && !w[1].usable);
    }

    #[test]
    fn anchor_validation() {
        let pair = pair_of(10);
        let monday = t0() + Duration::days(1);
        assert_eq!(
            slice_weeks(&pair, monday, 200).unwrap_err(),
            GridError::AnchorNotSundayMidnight(monday)
        );
        let late = t0() + Duration::days(7);
        assert!(matches!(
            slice_weeks(&pair, late, 200),
            Err(GridError::AnchorAfterFirstRow { .. })
        ));
        assert_eq!(sunday_on_or_before(t0() + Duration::days(3)), t0());
    }
}
