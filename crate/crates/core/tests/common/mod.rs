#![allow(dead_code)]

use chrono::NaiveDate;
use deltahedge_core::config::RunConfig;
use deltahedge_core::coordinator::MarketContext;
use deltahedge_core::market_data::{
    align_calendar, synth_generate, Bar, Dataset, MarketSlice, RegimeShock, SignalRequirement, SynthParams,
};
use deltahedge_core::signals::{compute_signals, MomentumForecaster};

pub fn dataset(days: usize, seed: u64, shocks: Vec<RegimeShock>) -> Dataset {
    synth_generate(&SynthParams {
        seed,
        n_days: days,
        shocks,
        ..SynthParams::default()
    })
    .expect("synthetic data")
}

pub fn context(data: &Dataset, cfg: &RunConfig) -> MarketContext {
    let slices = align_calendar(
        &data.bars,
        &data.options,
        &data.sentiment,
        &data.vix,
        SignalRequirement::Required,
    )
    .expect("aligned feeds");
    let signals = compute_signals(&slices, &MomentumForecaster, &cfg.regime_params());
    MarketContext::new(slices, signals).expect("market context")
}

pub fn small_config(strategy: &str, timesteps: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.run.strategy = strategy.into();
    cfg.rl.timesteps = timesteps;
    cfg.run.plot = false;
    cfg
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn bar_slice(date: NaiveDate, high: f64, low: f64, close: f64) -> MarketSlice {
    MarketSlice {
        date,
        bar: Bar {
            date,
            open: close,
            high,
            low,
            close,
            volume: 1_000,
        },
        puts: Vec::new(),
        sentiment: 50.0,
        vix: 20.0,
    }
}

use deltahedge_core::agents::TradingAction;
use deltahedge_core::portfolio::{
    apply_equity_trade, apply_option_trade, mark_put, portfolio_value, settle_expiries, CostModel, MarkModel,
    PortfolioState, PutSpec, TradeKind,
};

/// One fuzzed day: equity action, then an option order on quote `pick`
/// (modulo the chain) for `contracts`, negative for sales.
#[derive(Debug, Clone, Copy)]
pub struct FuzzDay {
    pub action: f64,
    pub pick: usize,
    pub contracts: i64,
    pub sell_held: bool,
}

/// Replays `days` over the market and checks that every daily value change
/// splits into holding P&L, settlement and execution effects minus costs.
pub fn check_conservation(market: &MarketContext, start: usize, cash: f64, days: &[FuzzDay]) -> Result<(), String> {
    let costs = CostModel::default();
    let marks = MarkModel::default();
    let mut state = PortfolioState::new(market.slice(start).date, cash);
    let mut prev_value = cash;
    let mut prev_slice = market.slice(start);
    for (k, op) in days.iter().enumerate() {
        let i = start + k;
        if i >= market.len() {
            break;
        }
        let slice = market.slice(i);
        let mut expected = prev_value;
        if k > 0 {
            expected += state.shares as f64 * (slice.close() - prev_slice.close());
            for p in &state.positions {
                let m = f64::from(p.spec.multiplier) * p.contracts as f64;
                expected += m * (mark_put(&p.spec, slice, &marks) - mark_put(&p.spec, prev_slice, &marks));
            }
        }
        let mut s = state.advanced_to(slice.date);
        for p in s.positions.iter().filter(|p| p.spec.expiry <= slice.date) {
            let m = f64::from(p.spec.multiplier) * p.contracts as f64;
            expected += m * ((p.spec.strike - slice.close()).max(0.0) - mark_put(&p.spec, slice, &marks));
        }
        let (settled, _) = settle_expiries(&s, slice);
        s = settled;

        let (after, rec) = apply_equity_trade(
            &s,
            TradingAction::new(op.action).map_err(|e| e.to_string())?,
            slice.close(),
            &costs,
        )
        .map_err(|e| e.to_string())?;
        if rec.kind != TradeKind::Equity {
            return Err("wrong trade kind".into());
        }
        expected -= rec.cost;
        s = after;

        let order = if op.sell_held && !s.positions.is_empty() {
            let spec = s.positions[op.pick % s.positions.len()].spec;
            slice
                .puts
                .iter()
                .find(|q| spec.matches(q))
                .map(|q| (spec, *q, -op.contracts.abs()))
        } else if !slice.puts.is_empty() {
            let q = slice.puts[op.pick % slice.puts.len()];
            Some((PutSpec::from_quote(&q, 100), q, op.contracts))
        } else {
            None
        };
        if let Some((spec, quote, n)) = order {
            let (after, rec) = apply_option_trade(&s, &spec, n, &quote, &costs).map_err(|e| e.to_string())?;
            let m = f64::from(spec.multiplier);
            expected += rec.quantity as f64 * m * (mark_put(&spec, slice, &marks) - rec.price) - rec.cost;
            s = after;
        }

        let value = portfolio_value(&s, slice, &marks);
        if (value - expected).abs() > 1e-9 * value.abs().max(1.0) {
            return Err(format!("day {k}: value {value} but components give {expected}"));
        }
        if s.cash < 0.0 {
            return Err(format!("day {k}: negative cash {}", s.cash));
        }
        state = s;
        prev_value = value;
        prev_slice = slice;
    }
    Ok(())
}
