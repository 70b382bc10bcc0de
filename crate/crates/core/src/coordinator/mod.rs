//! The daily state machine and the backtest driver.
//!
//! A day runs in fixed phases: settle expiries, look up signals, trade the
//! underlying, hedge with puts, then value the book and hand the shared
//! reward to both agents. [`DayProgress`] exposes the phases individually so
//! a training environment can interleave its own actions; [`step_day`] runs
//! them end to end.

mod backtest;
mod env;
mod rules;

pub use backtest::{
    load_market, run_backtest, test_range, write_equity_csv, BacktestReport, EquityRow, RegimeEntry, TrainedAgents,
};
pub use env::{fit_normalizer, PortfolioEnv};
pub use rules::{observe, Decision, HedgeRule, HoldTrader, NoHedge, PolicyHedger, PolicyTrader, TradeRule};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::agents::{
    target_put_contracts, AgentMessage, AgentRole, HedgeRatio, MessageBoard, ObservationInputs, OptionFeatures,
    TradingAction,
};
use crate::error::{Error, Result};
use crate::market_data::{MarketSlice, OptionQuote, OptionRight};
use crate::options_pricing::{bs_put_delta, implied_vol, year_fraction, PricingInputs};
use crate::portfolio::{
    apply_equity_trade, apply_option_trade, portfolio_value, settle_expiries, CostModel, MarkModel, PortfolioState,
    PutSpec, TradeRecord,
};
use crate::rl::sharpe::{reward_step, SharpeTracker};
use crate::signals::DailySignals;

/// Aligned market slices with their precomputed signals.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketContext {
    slices: Vec<MarketSlice>,
    signals: Vec<DailySignals>,
}

impl MarketContext {
    pub fn new(slices: Vec<MarketSlice>, signals: Vec<DailySignals>) -> Result<Self> {
        if slices.len() != signals.len() || slices.iter().zip(&signals).any(|(s, g)| s.date != g.date) {
            return Err(Error::Run("signals are not aligned with market slices".into()));
        }
        Ok(Self { slices, signals })
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slice(&self, index: usize) -> &MarketSlice {
        &self.slices[index]
    }

    pub fn signals(&self, index: usize) -> &DailySignals {
        &self.signals[index]
    }

    pub fn slices(&self) -> &[MarketSlice] {
        &self.slices
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.slices.iter().map(|s| s.date).collect()
    }

    /// Index of the first slice dated on or after `date`.
    pub fn index_on_or_after(&self, date: NaiveDate) -> usize {
        self.slices.partition_point(|s| s.date < date)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub costs: CostModel,
    pub marks: MarkModel,
    /// Shares per option contract.
    pub multiplier: u32,
    pub sharpe_window: usize,
    pub rf_daily: f64,
    /// Calendar days to expiry the hedger aims for.
    pub target_dte: i64,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            costs: CostModel::default(),
            marks: MarkModel::default(),
            multiplier: 100,
            sharpe_window: 60,
            rf_daily: 0.0,
            target_dte: 30,
        }
    }
}

/// Everything carried from one day to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    pub portfolio: PortfolioState,
    pub tracker: SharpeTracker<f64>,
    pub prev_value: Option<f64>,
    pub board: MessageBoard,
    /// Days completed so far.
    pub day: usize,
}

impl EngineState {
    pub fn new(date: NaiveDate, cash: f64, params: &EngineParams) -> Self {
        Self {
            portfolio: PortfolioState::new(date, cash),
            tracker: SharpeTracker::new(params.sharpe_window, params.rf_daily),
            prev_value: None,
            board: MessageBoard::default(),
            day: 0,
        }
    }
}

/// The put the hedger trades today, with the delta used for sizing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPut {
    pub quote: OptionQuote,
    pub delta: f64,
}

impl TargetPut {
    pub fn features(&self, spot: f64) -> OptionFeatures {
        OptionFeatures {
            strike_distance: self.quote.strike / spot - 1.0,
            dte: self.quote.dte(),
            mid: self.quote.mid(),
            delta: self.delta,
        }
    }
}

/// Sizing delta: quote delta, else Black–Scholes delta at the mid's implied
/// volatility, else at VIX-implied volatility.
pub fn put_delta(quote: &OptionQuote, slice: &MarketSlice, rate: f64) -> f64 {
    if let Some(d) = quote.delta.filter(|d| *d < 0.0) {
        return d;
    }
    let t = year_fraction::<f64>(quote.dte());
    let vol_fallback = (slice.vix / 100.0).max(1e-4);
    let Ok(inputs) = PricingInputs::new(slice.close(), quote.strike, t, rate, vol_fallback) else {
        return -0.5;
    };
    let vol = implied_vol(quote.mid(), &inputs, OptionRight::Put).unwrap_or(vol_fallback);
    bs_put_delta(&inputs.with_vol(vol))
}

/// Liquid put with expiry closest to `target_dte` calendar days, strike
/// nearest spot; ties go to the earlier expiry and lower strike.
pub fn select_put(slice: &MarketSlice, target_dte: i64, rate: f64) -> Option<TargetPut> {
    let spot = slice.close();
    let quote = slice
        .puts
        .iter()
        .filter(|q| q.volume >= 1 && q.ask > 0.0 && q.dte() > 0)
        .min_by(|a, b| {
            let ka = ((a.dte() - target_dte).abs(), a.expiry);
            let kb = ((b.dte() - target_dte).abs(), b.expiry);
            ka.cmp(&kb).then_with(|| {
                (a.strike - spot)
                    .abs()
                    .total_cmp(&(b.strike - spot).abs())
                    .then(a.strike.total_cmp(&b.strike))
            })
        })?;
    let delta = put_delta(quote, slice, rate);
    (delta < 0.0).then_some(TargetPut { quote: *quote, delta })
}

/// What a decision rule sees: today's slice and signals, history up to
/// today, the current book and the message board.
pub struct DayView<'a> {
    pub market: &'a MarketContext,
    pub index: usize,
    /// Day number within the run, zero on the first day.
    pub day: usize,
    pub state: &'a PortfolioState,
    pub inputs: ObservationInputs,
    pub board: &'a MessageBoard,
}

impl DayView<'_> {
    pub fn slice(&self) -> &MarketSlice {
        self.market.slice(self.index)
    }

    pub fn signals(&self) -> &DailySignals {
        self.market.signals(self.index)
    }

    /// Slices up to and including today.
    pub fn history(&self) -> &[MarketSlice] {
        &self.market.slices()[..=self.index]
    }
}

/// Record of one completed day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayContext {
    pub date: NaiveDate,
    pub pre_state: PortfolioState,
    pub post_state: PortfolioState,
    pub settlement: f64,
    pub forecast: f64,
    pub forecast_missing: bool,
    pub sentiment: f64,
    pub action: TradingAction,
    pub hedge: Option<HedgeRatio>,
    pub trades: Vec<TradeRecord>,
    pub value: f64,
    pub ret: Option<f64>,
    pub sharpe: f64,
    pub reward: f64,
    pub messages: Vec<AgentMessage>,
}

/// A day in flight. Dropping it discards every change.
#[derive(Debug, Clone)]
pub struct DayProgress {
    index: usize,
    state: EngineState,
    pre_state: PortfolioState,
    settlement: f64,
    target: Option<TargetPut>,
    action: TradingAction,
    hedge: Option<HedgeRatio>,
    trades: Vec<TradeRecord>,
    messages: Vec<AgentMessage>,
}

impl DayProgress {
    /// Phases 1–3: attach the slice, settle expiring puts, look up signals.
    pub fn begin(params: &EngineParams, market: &MarketContext, state: &EngineState, index: usize) -> Result<Self> {
        let slice = market.slice(index);
        if slice.date < state.portfolio.date || (state.day > 0 && slice.date == state.portfolio.date) {
            return Err(Error::Run(format!(
                "slice {} does not follow state date {}",
                slice.date, state.portfolio.date
            )));
        }
        let mut next = state.clone();
        let pre_state = state.portfolio.advanced_to(slice.date);
        let (settled, settlement) = settle_expiries(&pre_state, slice);
        next.portfolio = settled;
        Ok(Self {
            index,
            state: next,
            pre_state,
            settlement,
            target: select_put(slice, params.target_dte, params.marks.rate),
            action: TradingAction::hold(),
            hedge: None,
            trades: Vec::new(),
            messages: Vec::new(),
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn portfolio(&self) -> &PortfolioState {
        &self.state.portfolio
    }

    pub fn target(&self) -> Option<&TargetPut> {
        self.target.as_ref()
    }

    pub fn inputs(&self, params: &EngineParams, market: &MarketContext) -> ObservationInputs {
        let slice = market.slice(self.index);
        let sig = market.signals(self.index);
        let st = &self.state.portfolio;
        ObservationInputs {
            close: slice.close(),
            shares: st.shares,
            cash: st.cash,
            value: portfolio_value(st, slice, &params.marks),
            covered_shares: st.covered_shares(),
            option: self.target.map(|t| t.features(slice.close())),
            forecast: sig.forecast,
            sentiment: sig.sentiment,
            vix: sig.vix,
        }
    }

    pub fn view<'a>(&'a self, params: &EngineParams, market: &'a MarketContext) -> DayView<'a> {
        DayView {
            market,
            index: self.index,
            day: self.state.day,
            state: &self.state.portfolio,
            inputs: self.inputs(params, market),
            board: &self.state.board,
        }
    }

    fn stash_message(&mut self, date: NaiveDate, sender: AgentRole, summary: Option<Vec<f64>>) -> Result<()> {
        if let Some(s) = summary {
            self.messages.push(AgentMessage::new(date, sender, s)?);
        }
        Ok(())
    }

    /// Phase 4: rebalance the underlying at the close.
    pub fn trade(
        &mut self,
        params: &EngineParams,
        market: &MarketContext,
        decision: Decision<TradingAction>,
    ) -> Result<()> {
        let slice = market.slice(self.index);
        let (next, record) = apply_equity_trade(&self.state.portfolio, decision.action, slice.close(), &params.costs)?;
        self.state.portfolio = next;
        self.action = decision.action;
        if record.quantity != 0 {
            self.trades.push(record);
        }
        self.stash_message(slice.date, AgentRole::Trading, decision.summary)
    }

    /// Phase 5: buy the shortfall between the target hedge and the puts
    /// already held. Existing puts are held to expiry.
    pub fn hedge(
        &mut self,
        params: &EngineParams,
        market: &MarketContext,
        decision: Decision<Option<HedgeRatio>>,
    ) -> Result<()> {
        let slice = market.slice(self.index);
        self.hedge = decision.action;
        if let (Some(alpha), Some(target)) = (decision.action, self.target) {
            let st = &self.state.portfolio;
            let wanted = target_put_contracts(alpha, st.shares, target.delta, params.multiplier)?;
            let shortfall = wanted.saturating_sub(st.contracts());
            if shortfall > 0 {
                let spec = PutSpec::from_quote(&target.quote, params.multiplier);
                let (next, record) = apply_option_trade(st, &spec, shortfall as i64, &target.quote, &params.costs)?;
                self.state.portfolio = next;
                if record.quantity != 0 {
                    self.trades.push(record);
                }
            }
        }
        self.stash_message(slice.date, AgentRole::Hedging, decision.summary)
    }

    /// Phases 6–7: value the book, compute the shared reward, store the
    /// day's messages and hand back the next state.
    pub fn finish(self, params: &EngineParams, market: &MarketContext) -> Result<(EngineState, DayContext)> {
        let slice = market.slice(self.index);
        let sig = market.signals(self.index);
        let mut state = self.state;
        let value = portfolio_value(&state.portfolio, slice, &params.marks);
        if !value.is_finite() {
            return Err(Error::Run(format!("non-finite portfolio value on {}", slice.date)));
        }
        let ret = state.prev_value.map(|prev| value / prev - 1.0);
        let reward = match ret {
            Some(r) => {
                let before = state.tracker.sharpe();
                state.tracker.push(r);
                reward_step(before, state.tracker.sharpe())
            }
            None => 0.0,
        };
        state.prev_value = Some(value);
        for m in &self.messages {
            state.board.post(m.clone());
        }
        state.day += 1;
        let ctx = DayContext {
            date: slice.date,
            pre_state: self.pre_state,
            post_state: state.portfolio.clone(),
            settlement: self.settlement,
            forecast: sig.forecast,
            forecast_missing: sig.forecast_missing,
            sentiment: sig.sentiment,
            action: self.action,
            hedge: self.hedge,
            trades: self.trades,
            value,
            ret,
            sharpe: state.tracker.sharpe_or_zero(),
            reward,
            messages: self.messages,
        };
        Ok((state, ctx))
    }
}

/// All phases of one day. Any failure leaves `state` untouched and is
/// reported as [`Error::DayAborted`].
pub fn step_day(
    params: &EngineParams,
    market: &MarketContext,
    state: &EngineState,
    index: usize,
    trader: &dyn TradeRule,
    hedger: &dyn HedgeRule,
) -> Result<(EngineState, DayContext)> {
    let run = || -> Result<(EngineState, DayContext)> {
        let mut day = DayProgress::begin(params, market, state, index)?;
        let decision = trader.trade(&day.view(params, market))?;
        day.trade(params, market, decision)?;
        let decision = hedger.hedge(&day.view(params, market))?;
        day.hedge(params, market, decision)?;
        day.finish(params, market)
    };
    run().map_err(|e| Error::DayAborted {
        date: market.slice(index).date,
        source: Box::new(e),
    })
}

/// Runs `[start, end)` from fresh cash and returns each day's record.
pub fn simulate(
    params: &EngineParams,
    market: &MarketContext,
    range: std::ops::Range<usize>,
    initial_cash: f64,
    trader: &dyn TradeRule,
    hedger: &dyn HedgeRule,
) -> Result<Vec<DayContext>> {
    if range.is_empty() {
        return Ok(Vec::new());
    }
    let mut state = EngineState::new(market.slice(range.start).date, initial_cash, params);
    let mut days = Vec::with_capacity(range.len());
    for i in range {
        let (next, ctx) = step_day(params, market, &state, i, trader, hedger)?;
        state = next;
        days.push(ctx);
    }
    Ok(days)
}
