//! Share of holding accounts sitting on a paper gain.

use std::collections::{BTreeMap, VecDeque};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{TradeRecord, TradeSide};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GainError {
    #[error("no account holds a positive position at {0}")]
    NoHolders(DateTime<Utc>),
    #[error("evaluation price {0} must be positive")]
    InvalidPrice(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostBasis {
    #[default]
    AverageCost,
    Fifo,
}

#[derive(Debug, Clone, Default)]
struct Book {
    quantity: f64,
    average_cost: f64,
    lots: VecDeque<(f64, f64)>,
}

impl Book {
    /// Returns true when a sell exceeded the holding.
    fn apply(&mut self, basis: CostBasis, side: TradeSide, q: f64, price: f64) -> bool {
        match side {
            TradeSide::Buy => {
                self.average_cost = (self.quantity * self.average_cost + q * price) / (self.quantity + q);
                self.quantity += q;
                if basis == CostBasis::Fifo {
                    self.lots.push_back((q, price));
                }
                false
            }
            TradeSide::Sell => {
                self.quantity -= q;
                if basis == CostBasis::Fifo {
                    let mut left = q;
                    while left > 0.0 {
                        let Some(front) = self.lots.front_mut() else { break };
                        if front.0 <= left {
                            left -= front.0;
                            self.lots.pop_front();
                        } else {
                            front.0 -= left;
                            left = 0.0;
                        }
                    }
                }
                if self.quantity <= 0.0 {
                    let over = self.quantity < 0.0;
                    self.quantity = 0.0;
                    self.average_cost = 0.0;
                    self.lots.clear();
                    return over;
                }
                false
            }
        }
    }

    fn cost(&self, basis: CostBasis) -> f64 {
        match basis {
            CostBasis::AverageCost => self.average_cost,
            CostBasis::Fifo => {
                let q: f64 = self.lots.iter().map(|l| l.0).sum();
                self.lots.iter().map(|l| l.0 * l.1).sum::<f64>() / q
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccountPosition {
    pub holdings: f64,
    pub average_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainSnapshot {
    pub timestamp: DateTime<Utc>,
    pub price: f64,
    pub basis: CostBasis,
    pub positions: BTreeMap<String, AccountPosition>,
    pub holders: usize,
    pub in_gain: usize,
    pub pct_in_gain: f64,
    /// Sells that exceeded the holding and were clamped at zero.
    pub oversells: usize,
}

/// Incremental replay of a time-ordered trade stream.
#[derive(Debug, Clone)]
pub struct GainTracker<'a> {
    trades: Vec<&'a TradeRecord>,
    cursor: usize,
    basis: CostBasis,
    books: BTreeMap<&'a str, Book>,
    oversells: usize,
}

impl<'a> GainTracker<'a> {
    /// Trades are replayed by timestamp, ties broken by account id; trades of
    /// other assets are ignored when `asset` is given.
    pub fn new(trades: &'a [TradeRecord], asset: Option<&str>, basis: CostBasis) -> Self {
        let mut v: Vec<&TradeRecord> = trades
            .iter()
            .filter(|t| asset.is_none_or(|a| t.asset == a))
            .collect();
        v.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.account_id.cmp(&b.account_id)));
        Self { trades: v, cursor: 0, basis, books: BTreeMap::new(), oversells: 0 }
    }

    /// Apply every trade stamped at or before `at`.
    pub fn advance_to(&mut self, at: DateTime<Utc>) {
        while self.cursor < self.trades.len() && self.trades[self.cursor].timestamp <= at {
            let t = self.trades[self.cursor];
            let book = self.books.entry(t.account_id.as_str()).or_default();
            if book.apply(self.basis, t.side, t.quantity, t.price) {
                self.oversells += 1;
                log::debug!("oversell by {} at {} clamped to zero", t.account_id, t.timestamp);
            }
            self.cursor += 1;
        }
    }

    pub fn oversells(&self) -> usize {
        self.oversells
    }

    fn counts(&self, price: f64) -> (usize, usize) {
        let mut holders = 0;
        let mut in_gain = 0;
        for b in self.books.values() {
            if b.quantity > 0.0 {
                holders += 1;
                if price > b.cost(self.basis) {
                    in_gain += 1;
                }
            }
        }
        (holders, in_gain)
    }

    /// Gain proportion at `at` marked at `price`.
    pub fn pct_at(&mut self, at: DateTime<Utc>, price: f64) -> Result<f64, GainError> {
        if !(price > 0.0 && price.is_finite()) {
            return Err(GainError::InvalidPrice(price));
        }
        self.advance_to(at);
        let (holders, in_gain) = self.counts(price);
        if holders == 0 {
            return Err(GainError::NoHolders(at));
        }
        Ok(in_gain as f64 / holders as f64)
    }

    pub fn snapshot(&mut self, at: DateTime<Utc>, price: f64) -> Result<GainSnapshot, GainError> {
        let pct = self.pct_at(at, price)?;
        let (holders, in_gain) = self.counts(price);
        let positions = self
            .books
            .iter()
            .map(|(k, b)| {
                (
                    k.to_string(),
                    AccountPosition {
                        holdings: b.quantity,
                        average_cost: if b.quantity > 0.0 { b.cost(self.basis) } else { 0.0 },
                    },
                )
            })
            .collect();
        Ok(GainSnapshot {
            timestamp: at,
            price,
            basis: self.basis,
            positions,
            holders,
            in_gain,
            pct_in_gain: pct,
            oversells: self.oversells,
        })
    }
}

/// Average-cost gain proportion over all trades stamped at or before `at`.
pub fn pct_accounts_in_gain(
    trades: &[TradeRecord],
    at: DateTime<Utc>,
    price: f64,
) -> Result<f64, GainError> {
    GainTracker::new(trades, None, CostBasis::AverageCost).pct_at(at, price)
}

pub fn gain_snapshot(
    trades: &[TradeRecord],
    at: DateTime<Utc>,
    price: f64,
    basis: CostBasis,
) -> Result<GainSnapshot, GainError> {
    GainTracker::new(trades, None, basis).snapshot(at, price)
}
