use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::ingest::{TradeRecord, TradeSide};
use crate::quotegrid::grid_step;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeSpec {
    pub seed: u64,
    pub n_accounts: usize,
    pub asset: String,
    /// Chance an account trades in a given bar.
    pub trade_prob_per_bar: f64,
    /// Chance of buying (rather than selling) after the price fell since the
    /// account's last trade.
    pub buy_on_dip: f64,
    /// Chance of selling after the price rose.
    pub sell_on_rise: f64,
    /// Trade value range in local currency.
    pub min_value: f64,
    pub max_value: f64,
}

impl Default for TradeSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_accounts: 1000,
            asset: "BTC".into(),
            trade_prob_per_bar: 1.0 / 336.0,
            buy_on_dip: 0.65,
            sell_on_rise: 0.65,
            min_value: 1_000.0,
            max_value: 50_000.0,
        }
    }
}

impl TradeSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.n_accounts == 0 {
            return bad("n_accounts must be positive");
        }
        if !(self.trade_prob_per_bar > 0.0 && self.trade_prob_per_bar <= 1.0) {
            return bad("trade_prob_per_bar must lie in (0, 1]");
        }
        for p in [self.buy_on_dip, self.sell_on_rise] {
            if !(0.0..=1.0).contains(&p) {
                return bad("propensities must lie in [0, 1]");
            }
        }
        if !(self.min_value > 0.0 && self.max_value >= self.min_value) {
            return bad("trade value range must be positive and ordered");
        }
        Ok(())
    }

    pub fn account_id(&self, i: usize) -> String {
        let width = (self.n_accounts.max(2) - 1).to_string().len();
        format!("acct{i:0width$}")
    }
}

/// One bar of the price path: trades execute at `trade_price`, the oracle
/// marks positions at `mark_price`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeBar {
    pub label: DateTime<Utc>,
    pub trade_price: f64,
    pub mark_price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub timestamp: DateTime<Utc>,
    pub holders: usize,
    pub in_gain: usize,
    /// None while nobody holds the asset.
    pub pct_in_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeSimulation {
    /// Sorted by (timestamp, account_id).
    pub trades: Vec<TradeRecord>,
    /// Gain proportion after each bar's trades, marked at that bar.
    pub oracle: Vec<GainPoint>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Position {
    quantity: f64,
    cost: f64,
}

impl Position {
    fn apply(&mut self, side: TradeSide, q: f64, price: f64) {
        match side {
            TradeSide::Buy => {
                self.cost = (self.quantity * self.cost + q * price) / (self.quantity + q);
                self.quantity += q;
            }
            TradeSide::Sell => {
                self.quantity -= q;
                if self.quantity <= 0.0 {
                    self.quantity = 0.0;
                    self.cost = 0.0;
                }
            }
        }
    }
}

struct Event {
    bar: usize,
    account: usize,
    side: TradeSide,
    quantity: f64,
    offset_secs: i64,
}

/// Simulate account trading over a bar path and emit the true gain path.
pub fn gen_trades(spec: &TradeSpec, bars: &[TradeBar]) -> Result<TradeSimulation, SynthError> {
    spec.validate()?;
    if bars.is_empty() {
        return Err(SynthError::InvalidSpec("price path is empty".into()));
    }
    if bars.iter().any(|b| !(b.trade_price > 0.0 && b.mark_price > 0.0)) {
        return Err(SynthError::InvalidSpec("prices must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gap = Geometric::new(spec.trade_prob_per_bar).expect("validated probability");
    let bar_secs = grid_step().num_seconds();
    let mut events = Vec::new();
    for account in 0..spec.n_accounts {
        let mut pos = Position::default();
        let mut last_price = 0.0;
        let mut bar = gap.sample(&mut rng) as usize;
        while bar < bars.len() {
            let price = bars[bar].trade_price;
            let buy = if pos.quantity == 0.0 {
                true
            } else if price < last_price {
                rng.random_bool(spec.buy_on_dip)
            } else {
                !rng.random_bool(spec.sell_on_rise)
            };
            let (side, quantity) = if buy {
                let value = rng.random_range(spec.min_value..=spec.max_value);
                (TradeSide::Buy, value / price)
            } else if rng.random_bool(0.5) {
                (TradeSide::Sell, pos.quantity)
            } else {
                (TradeSide::Sell, pos.quantity * 0.5)
            };
            pos.apply(side, quantity, price);
            last_price = price;
            events.push(Event {
                bar,
                account,
                side,
                quantity,
                offset_secs: rng.random_range(1..bar_secs),
            });
            bar = bar.saturating_add(1 + gap.sample(&mut rng) as usize);
        }
    }
    events.sort_by_key(|e| (e.bar, e.account));

    let mut positions = vec![Position::default(); spec.n_accounts];
    let mut oracle = Vec::with_capacity(bars.len());
    let mut next = 0;
    for (i, b) in bars.iter().enumerate() {
        while next < events.len() && events[next].bar == i {
            let e = &events[next];
            positions[e.account].apply(e.side, e.quantity, b.trade_price);
            next += 1;
        }
        let mut holders = 0;
        let mut in_gain = 0;
        for p in &positions {
            if p.quantity > 0.0 {
                holders += 1;
                if b.mark_price > p.cost {
                    in_gain += 1;
                }
            }
        }
        oracle.push(GainPoint {
            timestamp: b.label,
            holders,
            in_gain,
            pct_in_gain: (holders > 0).then(|| in_gain as f64 / holders as f64),
        });
    }

    let mut trades: Vec<TradeRecord> = events
        .iter()
        .map(|e| TradeRecord {
            timestamp: bars[e.bar].label - grid_step() + Duration::seconds(e.offset_secs),
            account_id: spec.account_id(e.account),
            asset: spec.asset.clone(),
            side: e.side,
            quantity: e.quantity,
            price: bars[e.bar].trade_price,
        })
        .collect();
    trades.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.account_id.cmp(&b.account_id))
    });
    Ok(TradeSimulation { trades, oracle })
}
