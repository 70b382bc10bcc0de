//! Cash/share/put ledger: equity and option execution with costs, expiry
//! settlement and mark-to-market valuation.
//!
//! Every operation takes a state by reference and returns a new one, so a
//! failed day never leaves a half-applied ledger behind.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::TradingAction;
use crate::market_data::{MarketSlice, OptionQuote, OptionRight};
use crate::options_pricing::{bs_put_price, year_fraction, PricingInputs};

/// Slack used when turning real share counts into integers.
const ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PortfolioError {
    #[error("quote ({quote_strike} exp {quote_expiry} on {quote_date}) does not match contract ({strike} exp {expiry}) on {date}")]
    QuoteMismatch {
        strike: f64,
        expiry: NaiveDate,
        date: NaiveDate,
        quote_strike: f64,
        quote_expiry: NaiveDate,
        quote_date: NaiveDate,
    },
    #[error("execution price must be positive and finite, got {0}")]
    InvalidPrice(f64),
}

/// Contract identity of a listed put.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PutSpec {
    pub strike: f64,
    pub expiry: NaiveDate,
    /// Shares per contract.
    pub multiplier: u32,
}

impl PutSpec {
    pub fn from_quote(quote: &OptionQuote, multiplier: u32) -> Self {
        Self {
            strike: quote.strike,
            expiry: quote.expiry,
            multiplier,
        }
    }

    pub fn matches(&self, quote: &OptionQuote) -> bool {
        quote.right == OptionRight::Put && quote.expiry == self.expiry && quote.strike == self.strike
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub spec: PutSpec,
    pub contracts: u64,
    /// Average per-share premium paid.
    pub entry_premium: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub date: NaiveDate,
    pub cash: f64,
    pub shares: u64,
    pub positions: Vec<Position>,
}

impl PortfolioState {
    pub fn new(date: NaiveDate, cash: f64) -> Self {
        Self {
            date,
            cash,
            shares: 0,
            positions: Vec::new(),
        }
    }

    /// Aggregate contracts over all open puts.
    pub fn contracts(&self) -> u64 {
        self.positions.iter().map(|p| p.contracts).sum()
    }

    /// Shares covered by open puts.
    pub fn covered_shares(&self) -> u64 {
        self.positions
            .iter()
            .map(|p| p.contracts * u64::from(p.spec.multiplier))
            .sum()
    }

    pub fn held(&self, spec: &PutSpec) -> u64 {
        self.positions
            .iter()
            .find(|p| p.spec == *spec)
            .map_or(0, |p| p.contracts)
    }

    pub fn advanced_to(&self, date: NaiveDate) -> Self {
        Self { date, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostModel {
    /// Proportional equity cost.
    pub equity_rate: f64,
    /// Currency per option contract.
    pub option_fixed_per_contract: f64,
    /// Proportional cost on contract premium.
    pub option_prop_rate: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            equity_rate: 0.002,
            option_fixed_per_contract: 0.70,
            option_prop_rate: 0.005,
        }
    }
}

impl CostModel {
    pub fn zero() -> Self {
        Self {
            equity_rate: 0.0,
            option_fixed_per_contract: 0.0,
            option_prop_rate: 0.0,
        }
    }

    pub fn equity_cost(&self, price: f64, shares: u64) -> f64 {
        self.equity_rate * price * shares as f64
    }

    /// Fixed plus proportional cost on `contracts` at a contract premium.
    pub fn option_cost(&self, contracts: u64, contract_premium: f64) -> f64 {
        let n = contracts as f64;
        n * self.option_fixed_per_contract + self.option_prop_rate * n * contract_premium
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TradeKind {
    Equity,
    Option,
}

impl TradeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TradeKind::Equity => "equity",
            TradeKind::Option => "option",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub date: NaiveDate,
    pub kind: TradeKind,
    /// Executed shares or contracts; negative for sales.
    pub quantity: i64,
    /// Per-share execution price.
    pub price: f64,
    pub cost: f64,
    /// Quantity asked for before gating and affordability clamps.
    pub requested: i64,
    pub spec: Option<PutSpec>,
}

impl TradeRecord {
    fn noop(date: NaiveDate, kind: TradeKind, price: f64, requested: i64, spec: Option<PutSpec>) -> Self {
        Self {
            date,
            kind,
            quantity: 0,
            price,
            cost: 0.0,
            requested,
            spec,
        }
    }

    pub fn was_clamped(&self) -> bool {
        self.quantity != self.requested
    }
}

/// How held puts are marked when no quote matches them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MarkModel {
    /// Annualized rate.
    pub rate: f64,
}

/// Per-share liquidation mark: bid of the matching quote, otherwise the
/// Black–Scholes value at VIX-implied volatility (intrinsic once expired).
pub fn mark_put(spec: &PutSpec, slice: &MarketSlice, marks: &MarkModel) -> f64 {
    if let Some(q) = slice.puts.iter().find(|q| spec.matches(q)) {
        return q.bid;
    }
    let t = year_fraction::<f64>((spec.expiry - slice.date).num_days());
    let vol = (slice.vix / 100.0).max(1e-4);
    PricingInputs::new(slice.close(), spec.strike, t, marks.rate, vol)
        .map(|p| bs_put_price(&p))
        .unwrap_or_else(|_| (spec.strike - slice.close()).max(0.0))
}

/// `cash + close·shares + Σ mark·M·n`.
pub fn portfolio_value(state: &PortfolioState, slice: &MarketSlice, marks: &MarkModel) -> f64 {
    debug_assert_eq!(state.date, slice.date);
    let options: f64 = state
        .positions
        .iter()
        .map(|p| mark_put(&p.spec, slice, marks) * f64::from(p.spec.multiplier) * p.contracts as f64)
        .sum();
    state.cash + slice.close() * state.shares as f64 + options
}

/// Largest `n ≤ cap` with `n·unit ≤ budget`, robust to rounding.
fn affordable(budget: f64, unit: f64, cap: u64) -> u64 {
    if budget <= 0.0 || unit <= 0.0 {
        return if unit <= 0.0 { cap } else { 0 };
    }
    let mut n = ((budget / unit).floor() as u64).min(cap);
    while n > 0 && n as f64 * unit > budget {
        n -= 1;
    }
    n
}

/// Target-share rule: buys spend the fraction `a` of cash (costs included),
/// sells liquidate the fraction `|a|` of shares.
pub fn apply_equity_trade(
    state: &PortfolioState,
    action: TradingAction,
    price: f64,
    costs: &CostModel,
) -> Result<(PortfolioState, TradeRecord), PortfolioError> {
    if !(price.is_finite() && price > 0.0) {
        return Err(PortfolioError::InvalidPrice(price));
    }
    let a = action.value();
    let held = state.shares;
    let mut next = state.clone();
    if a > 0.0 {
        let budget = a * state.cash;
        let wanted = (budget / price + ROUNDING_SLACK).floor().max(0.0) as u64;
        let unit = price * (1.0 + costs.equity_rate);
        let n = affordable(budget.min(state.cash), unit, wanted);
        let cost = costs.equity_cost(price, n);
        next.cash = state.cash - n as f64 * price - cost;
        next.shares = held + n;
        let record = TradeRecord {
            date: state.date,
            kind: TradeKind::Equity,
            quantity: n as i64,
            price,
            cost,
            requested: wanted as i64,
            spec: None,
        };
        Ok((next, record))
    } else if a < 0.0 {
        let keep = ((held as f64) * (1.0 + a) - ROUNDING_SLACK).ceil().max(0.0) as u64;
        let n = held - keep.min(held);
        let cost = costs.equity_cost(price, n);
        next.cash = state.cash + n as f64 * price - cost;
        next.shares = held - n;
        let record = TradeRecord {
            date: state.date,
            kind: TradeKind::Equity,
            quantity: -(n as i64),
            price,
            cost,
            requested: -(n as i64),
            spec: None,
        };
        Ok((next, record))
    } else {
        Ok((next, TradeRecord::noop(state.date, TradeKind::Equity, price, 0, None)))
    }
}

/// Buys at the ask, sells at the bid. Size is clamped by
/// `min(volume, open interest)`, by cash, and (for sales) by the position.
pub fn apply_option_trade(
    state: &PortfolioState,
    spec: &PutSpec,
    delta_contracts: i64,
    quote: &OptionQuote,
    costs: &CostModel,
) -> Result<(PortfolioState, TradeRecord), PortfolioError> {
    if !spec.matches(quote) || quote.date != state.date {
        return Err(PortfolioError::QuoteMismatch {
            strike: spec.strike,
            expiry: spec.expiry,
            date: state.date,
            quote_strike: quote.strike,
            quote_expiry: quote.expiry,
            quote_date: quote.date,
        });
    }
    let m = f64::from(spec.multiplier);
    let gate = quote.liquidity();
    let mut next = state.clone();
    if delta_contracts > 0 {
        let wanted = delta_contracts as u64;
        let premium = quote.ask * m;
        let unit = premium * (1.0 + costs.option_prop_rate) + costs.option_fixed_per_contract;
        let n = affordable(state.cash, unit, wanted.min(gate));
        if n == 0 {
            return Ok((
                next,
                TradeRecord::noop(state.date, TradeKind::Option, quote.ask, delta_contracts, Some(*spec)),
            ));
        }
        let cost = costs.option_cost(n, premium);
        next.cash = state.cash - n as f64 * premium - cost;
        match next.positions.iter_mut().find(|p| p.spec == *spec) {
            Some(pos) => {
                let total = pos.contracts + n;
                pos.entry_premium = (pos.entry_premium * pos.contracts as f64 + quote.ask * n as f64) / total as f64;
                pos.contracts = total;
            }
            None => next.positions.push(Position {
                spec: *spec,
                contracts: n,
                entry_premium: quote.ask,
            }),
        }
        let record = TradeRecord {
            date: state.date,
            kind: TradeKind::Option,
            quantity: n as i64,
            price: quote.ask,
            cost,
            requested: delta_contracts,
            spec: Some(*spec),
        };
        Ok((next, record))
    } else if delta_contracts < 0 {
        let held = state.held(spec);
        let mut n = delta_contracts.unsigned_abs().min(held).min(gate);
        let premium = quote.bid * m;
        let net_per_contract = premium * (1.0 - costs.option_prop_rate) - costs.option_fixed_per_contract;
        if net_per_contract < 0.0 {
            n = n.min(affordable(state.cash, -net_per_contract, n));
        }
        if n == 0 {
            return Ok((
                next,
                TradeRecord::noop(state.date, TradeKind::Option, quote.bid, delta_contracts, Some(*spec)),
            ));
        }
        let cost = costs.option_cost(n, premium);
        next.cash = state.cash + n as f64 * premium - cost;
        if let Some(idx) = next.positions.iter().position(|p| p.spec == *spec) {
            next.positions[idx].contracts -= n;
            if next.positions[idx].contracts == 0 {
                next.positions.remove(idx);
            }
        }
        let record = TradeRecord {
            date: state.date,
            kind: TradeKind::Option,
            quantity: -(n as i64),
            price: quote.bid,
            cost,
            requested: delta_contracts,
            spec: Some(*spec),
        };
        Ok((next, record))
    } else {
        Ok((
            next,
            TradeRecord::noop(state.date, TradeKind::Option, quote.mid(), 0, Some(*spec)),
        ))
    }
}

/// Cash-settles every put expiring on or before the slice date at
/// `n·M·max(0, K − close)` and removes it.
pub fn settle_expiries(state: &PortfolioState, slice: &MarketSlice) -> (PortfolioState, f64) {
    debug_assert_eq!(state.date, slice.date);
    let mut next = state.clone();
    let mut proceeds = 0.0;
    next.positions.retain(|p| {
        if p.spec.expiry <= slice.date {
            proceeds += p.contracts as f64 * f64::from(p.spec.multiplier) * (p.spec.strike - slice.close()).max(0.0);
            false
        } else {
            true
        }
    });
    next.cash += proceeds;
    (next, proceeds)
}

/// `date,kind,quantity,price,cost`.
pub fn write_trade_log<W: Write>(dst: W, trades: &[TradeRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(dst);
    w.write_record(["date", "kind", "quantity", "price", "cost"])?;
    for t in trades {
        w.write_record([
            t.date.to_string(),
            t.kind.as_str().to_string(),
            t.quantity.to_string(),
            t.price.to_string(),
            t.cost.to_string(),
        ])?;
    }
    w.flush()
}
