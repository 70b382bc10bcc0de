use std::io::Write;
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;
use serde_json::json;

use crate::agents::{AgentPolicy, ObservationLayout};
use crate::baselines::{BuyAndHold, ClassicDelta, KdjRsi, StrategyKind};
use crate::checkpoint::{hedging_checkpoint, load_checkpoint, save_checkpoint, TRADING_CHECKPOINT};
use crate::config::RunConfig;
use crate::ensemble::{run_cycle, train_hedger, train_trader, SelectionRow};
use crate::error::{Error, Result};
use crate::market_data::{
    align_calendar, load_bars, load_option_chain, load_sentiment, load_vix, DataError, SignalRequirement,
};
use crate::metrics::{compute_metrics, regime_slice, MetricTable};
use crate::plot::{line_chart, Series};
use crate::portfolio::{write_trade_log, TradeRecord};
use crate::rl::{derive_seed, LearnerKind, TrainingLog};
use crate::signals::{compute_signals, MomentumForecaster};

use super::{
    step_day, EngineParams, EngineState, HedgeRule, HoldTrader, MarketContext, NoHedge, PolicyHedger, PolicyTrader,
    TradeRule,
};

fn load_optional<T>(
    path: &Path,
    required: bool,
    load: impl FnOnce(&Path) -> std::result::Result<Vec<T>, DataError>,
) -> Result<Vec<T>> {
    if !required && !path.exists() {
        return Ok(Vec::new());
    }
    Ok(load(path)?)
}

/// Loads and aligns the four feeds named by the config and precomputes the
/// daily signals.
pub fn load_market(cfg: &RunConfig) -> Result<MarketContext> {
    let d = &cfg.data;
    let mut bars = load_bars(cfg.data_path(&d.bars))?;
    bars.retain(|b| d.start.is_none_or(|s| b.date >= s) && d.end.is_none_or(|e| b.date <= e));
    let chain = load_optional(&cfg.data_path(&d.options), false, |p| load_option_chain(p))?;
    let sentiment = load_optional(&cfg.data_path(&d.sentiment), d.require_signals, |p| load_sentiment(p))?;
    let vix = load_optional(&cfg.data_path(&d.vix), d.require_signals, |p| load_vix(p))?;
    let requirement = if d.require_signals {
        SignalRequirement::Required
    } else {
        SignalRequirement::Optional
    };
    let slices = align_calendar(&bars, &chain, &sentiment, &vix, requirement)?;
    let signals = compute_signals(&slices, &MomentumForecaster, &cfg.regime_params());
    MarketContext::new(slices, signals)
}

/// Decision dates as an index range into `market`.
pub fn test_range(cfg: &RunConfig, market: &MarketContext) -> Result<Range<usize>> {
    let start = match cfg.run.test_start {
        Some(d) => market.index_on_or_after(d),
        None => cfg.schedule().required_history().min(market.len().saturating_sub(1)),
    };
    let end = match cfg.run.test_end {
        Some(d) => market.slices().partition_point(|s| s.date <= d),
        None => market.len(),
    };
    if start >= end {
        return Err(Error::Run("test range contains no trading days".into()));
    }
    Ok(start..end)
}

/// Policies loaded from, or written to, a checkpoint directory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainedAgents {
    pub trader: Option<AgentPolicy>,
    pub hedgers: Vec<AgentPolicy>,
}

impl TrainedAgents {
    pub fn save(&self, dir: &Path) -> Result<()> {
        if let Some(t) = &self.trader {
            save_checkpoint(dir, TRADING_CHECKPOINT, t)?;
        }
        for h in &self.hedgers {
            save_checkpoint(dir, &hedging_checkpoint(h.params.kind), h)?;
        }
        Ok(())
    }

    pub fn load_trader(dir: &Path) -> Result<AgentPolicy> {
        Ok(load_checkpoint(&dir.join(format!("{TRADING_CHECKPOINT}.json")))?)
    }

    /// Trains the trading agent on the lookback window before the test
    /// range, then every hedging candidate against it.
    pub fn train(cfg: &RunConfig, market: &MarketContext) -> Result<(Self, Vec<(String, TrainingLog)>)> {
        let params = cfg.engine_params();
        let test = test_range(cfg, market)?;
        let (window, _) = cfg.schedule().windows(test.start).ok_or_else(|| {
            Error::Run(format!(
                "need {} days of history before the test range",
                cfg.schedule().required_history()
            ))
        })?;
        let settings = cfg.training_settings();
        let seed = cfg.run.seed;
        let layout = match cfg.strategy()? {
            StrategyKind::StandaloneRl => ObservationLayout::EquityOnly,
            _ => ObservationLayout::Full,
        };
        let mut logs = Vec::new();
        let mut log = TrainingLog::default();
        let trader = train_trader(
            &params,
            market,
            window.clone(),
            layout,
            &NoHedge,
            cfg.trader_learner()?,
            &settings,
            derive_seed(seed, &[test.start as u64, 0]),
            Some(&mut log),
        )?;
        logs.push((TRADING_CHECKPOINT.to_string(), log));
        let rule = PolicyTrader::new(trader.clone());
        let mut hedgers = Vec::new();
        for kind in cfg.candidates()? {
            let mut log = TrainingLog::default();
            let job_seed = derive_seed(seed, &[test.start as u64, kind as u64 + 1]);
            hedgers.push(train_hedger(
                &params,
                market,
                window.clone(),
                &rule,
                kind,
                &settings,
                job_seed,
                Some(&mut log),
            )?);
            logs.push((hedging_checkpoint(kind), log));
        }
        Ok((
            Self {
                trader: Some(trader),
                hedgers,
            },
            logs,
        ))
    }
}

/// One row of `equity.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquityRow {
    pub date: NaiveDate,
    pub value: f64,
    #[serde(rename = "return")]
    pub ret: Option<f64>,
    pub cash: f64,
    pub shares: u64,
    pub contracts: u64,
    pub action: f64,
    pub hedge_ratio: Option<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeEntry {
    pub label: String,
    pub metrics: Option<MetricTable<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub config: String,
    pub rows: Vec<EquityRow>,
    pub trades: Vec<TradeRecord>,
    pub metrics: Option<MetricTable<f64>>,
    pub regimes: Vec<RegimeEntry>,
    pub selections: Vec<SelectionRow>,
    pub events: Vec<String>,
    pub plot: bool,
}

/// `date,value,return,cash,shares,contracts,action,hedge_ratio,reward`.
pub fn write_equity_csv<W: Write>(dst: W, rows: &[EquityRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(dst);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

impl BacktestReport {
    pub fn equity(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    pub fn returns(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ret).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.rows.iter().map(|r| r.date).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "strategy": self.strategy.to_string(),
            "seed": self.seed,
            "start": self.rows.first().map(|r| r.date),
            "end": self.rows.last().map(|r| r.date),
            "n_days": self.rows.len(),
            "final_value": self.rows.last().map(|r| r.value),
            "metrics": self.metrics,
            "regimes": self.regimes,
            "selections": self.selections,
            "events": self.events,
            "config": self.config,
        })
    }

    /// Writes `report.json`, `equity.csv`, `trades.csv`, `selections.csv`
    /// and, when plotting is on, `equity.svg`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| Error::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut text = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        text.push('\n');
        let p = dir.join("report.json");
        std::fs::write(&p, text).map_err(io(&p))?;

        let mut buf = Vec::new();
        write_equity_csv(&mut buf, &self.rows).expect("in-memory write");
        let p = dir.join("equity.csv");
        std::fs::write(&p, buf).map_err(io(&p))?;

        let mut buf = Vec::new();
        write_trade_log(&mut buf, &self.trades).expect("in-memory write");
        let p = dir.join("trades.csv");
        std::fs::write(&p, buf).map_err(io(&p))?;

        let mut buf = Vec::new();
        crate::ensemble::write_selections(&mut buf, &self.selections).expect("in-memory write");
        let p = dir.join("selections.csv");
        std::fs::write(&p, buf).map_err(io(&p))?;

        if self.plot {
            let label = self.strategy.to_string();
            let values = self.equity();
            let svg = line_chart(
                &format!("Equity: {label}"),
                &[Series {
                    label: &label,
                    values: &values,
                }],
            );
            let p = dir.join("equity.svg");
            std::fs::write(&p, svg).map_err(io(&p))?;
        }
        Ok(())
    }
}

struct Runner<'a> {
    params: EngineParams,
    market: &'a MarketContext,
    state: EngineState,
    rows: Vec<EquityRow>,
    trades: Vec<TradeRecord>,
    events: Vec<String>,
}

impl Runner<'_> {
    fn run(&mut self, range: Range<usize>, trader: &dyn TradeRule, hedger: &dyn HedgeRule) -> Result<()> {
        for i in range {
            let (next, ctx) = step_day(&self.params, self.market, &self.state, i, trader, hedger)?;
            self.state = next;
            if ctx.forecast_missing {
                self.events
                    .push(format!("{}: forecast unavailable, neutral 0 substituted", ctx.date));
            }
            self.rows.push(EquityRow {
                date: ctx.date,
                value: ctx.value,
                ret: ctx.ret,
                cash: ctx.post_state.cash,
                shares: ctx.post_state.shares,
                contracts: ctx.post_state.contracts(),
                action: ctx.action.value(),
                hedge_ratio: ctx.hedge.map(|h| h.value()),
                reward: ctx.reward,
            });
            self.trades.extend(ctx.trades);
        }
        Ok(())
    }
}

/// Runs the configured strategy over the test range. RL strategies retrain
/// at every cycle boundary on data strictly before it.
pub fn run_backtest(cfg: &RunConfig, market: &MarketContext) -> Result<BacktestReport> {
    let strategy = cfg.strategy()?;
    let test = test_range(cfg, market)?;
    let params = cfg.engine_params();
    let schedule = cfg.schedule();
    let settings = cfg.training_settings();
    let seed = cfg.run.seed;
    let mut runner = Runner {
        params,
        market,
        state: EngineState::new(market.slice(test.start).date, cfg.run.initial_cash, &params),
        rows: Vec::with_capacity(test.len()),
        trades: Vec::new(),
        events: Vec::new(),
    };
    let mut selections = Vec::new();

    match strategy {
        StrategyKind::BuyAndHold => runner.run(test.clone(), &BuyAndHold, &NoHedge)?,
        StrategyKind::KdjRsi => {
            let rule = KdjRsi {
                kdj: cfg.kdj_params(),
                rsi: cfg.rsi_params(),
            };
            runner.run(test.clone(), &rule, &NoHedge)?
        }
        _ => {
            let layout = match strategy {
                StrategyKind::StandaloneRl => ObservationLayout::EquityOnly,
                _ => ObservationLayout::Full,
            };
            let fixed_trader = match cfg.checkpoint_dir() {
                Some(dir) => Some(PolicyTrader::new(TrainedAgents::load_trader(&dir)?)),
                None => None,
            };
            let candidates: Vec<LearnerKind> = strategy.hedging_candidates(&cfg.candidates()?);
            let mut trader: Box<dyn TradeRule> = Box::new(HoldTrader);
            let mut hedger: Box<dyn HedgeRule> = match strategy {
                StrategyKind::ClassicDelta => Box::new(ClassicDelta),
                _ => Box::new(NoHedge),
            };
            for cycle in schedule.cycles(test.clone()) {
                let d = cycle.start;
                let date = market.slice(d).date;
                if let Some(t) = &fixed_trader {
                    trader = Box::new(t.clone());
                } else if let Some((window, _)) = schedule.windows(d) {
                    let policy = train_trader(
                        &params,
                        market,
                        window,
                        layout,
                        hedger.as_ref(),
                        cfg.trader_learner()?,
                        &settings,
                        derive_seed(seed, &[d as u64, 0]),
                        None,
                    )?;
                    trader = Box::new(PolicyTrader::new(policy));
                } else {
                    runner.events.push(format!(
                        "{date}: insufficient history to train the trading agent, previous policy retained"
                    ));
                }

                if !candidates.is_empty() {
                    match run_cycle(
                        &params,
                        market,
                        &schedule,
                        d,
                        trader.as_ref(),
                        &candidates,
                        &settings,
                        derive_seed(seed, &[1]),
                    )? {
                        None => runner.events.push(format!(
                            "{date}: insufficient history for hedger selection, previous policy retained"
                        )),
                        Some(outcome) => {
                            for (i, r) in outcome.results.iter().enumerate() {
                                selections.push(SelectionRow {
                                    cycle_start: date,
                                    candidate: r.kind.as_str().to_string(),
                                    metric: r.metric,
                                    selected: outcome.selected.is_some_and(|s| s.index == i),
                                });
                            }
                            match outcome.active() {
                                Some(best) => {
                                    if outcome.selected.is_some_and(|s| s.tie) {
                                        runner
                                            .events
                                            .push(format!("{date}: metric tie, {} chosen by learner order", best.kind));
                                    }
                                    hedger = Box::new(PolicyHedger::new(best.policy.clone()));
                                }
                                None => runner.events.push(format!(
                                    "{date}: no candidate has a defined metric, previous policy retained"
                                )),
                            }
                        }
                    }
                }
                runner.run(cycle, trader.as_ref(), hedger.as_ref())?;
            }
        }
    }

    let equity: Vec<f64> = runner.rows.iter().map(|r| r.value).collect();
    let dates: Vec<NaiveDate> = runner.rows.iter().map(|r| r.date).collect();
    let rf = params.rf_daily;
    let metrics = compute_metrics(&equity, rf).ok();
    let regimes = cfg
        .regime_windows()?
        .into_iter()
        .map(|w| RegimeEntry {
            label: w.label.clone(),
            metrics: regime_slice(&dates, &equity, rf, std::slice::from_ref(&w))
                .ok()
                .and_then(|mut v| v.pop())
                .map(|(_, m)| m),
        })
        .collect();
    Ok(BacktestReport {
        strategy,
        seed,
        config: cfg.to_toml(),
        rows: runner.rows,
        trades: runner.trades,
        metrics,
        regimes,
        selections,
        events: runner.events,
        plot: cfg.run.plot,
    })
}
