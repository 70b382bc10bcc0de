use std::ops::Range;

use crate::agents::{
    build_observation, AgentRole, CommProjection, HedgeRatio, Normalizer, ObservationInputs, ObservationLayout,
    TradingAction,
};
use crate::error::Error;
use crate::rl::{Env, RlError, Squash, Step};

use super::{select_put, DayProgress, Decision, EngineParams, EngineState, HedgeRule, MarketContext, TradeRule};

enum Partner<'a> {
    Hedger(&'a dyn HedgeRule),
    Trader(&'a dyn TradeRule),
}

/// One pass over a training window per episode. The learning agent acts in
/// its own phase of each day; the partner agent is a frozen rule. Both
/// receive the coordinator's shared reward.
pub struct PortfolioEnv<'a> {
    params: &'a EngineParams,
    market: &'a MarketContext,
    window: Range<usize>,
    initial_cash: f64,
    role: AgentRole,
    layout: ObservationLayout,
    normalizer: Normalizer,
    comm: Option<CommProjection>,
    partner: Partner<'a>,
    state: Option<EngineState>,
    day: Option<DayProgress>,
    sharpe: f64,
}

fn env_err(e: Error) -> RlError {
    RlError::Env(e.to_string())
}

/// Z-score statistics of the market features over `window`.
pub fn fit_normalizer(
    params: &EngineParams,
    market: &MarketContext,
    window: Range<usize>,
    layout: ObservationLayout,
) -> Normalizer {
    let rows: Vec<Vec<f64>> = window
        .map(|i| {
            let slice = market.slice(i);
            let sig = market.signals(i);
            ObservationInputs {
                close: slice.close(),
                shares: 0,
                cash: 0.0,
                value: 0.0,
                covered_shares: 0,
                option: select_put(slice, params.target_dte, params.marks.rate).map(|t| t.features(slice.close())),
                forecast: sig.forecast,
                sentiment: sig.sentiment,
                vix: sig.vix,
            }
            .market_features(layout)
        })
        .collect();
    Normalizer::fit(&rows)
}

impl<'a> PortfolioEnv<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        params: &'a EngineParams,
        market: &'a MarketContext,
        window: Range<usize>,
        initial_cash: f64,
        role: AgentRole,
        layout: ObservationLayout,
        hidden_dim: usize,
        partner: Partner<'a>,
    ) -> Self {
        let normalizer = fit_normalizer(params, market, window.clone(), layout);
        let comm =
            (layout == ObservationLayout::Full).then(|| CommProjection::for_role(role, layout.base_dim(), hidden_dim));
        Self {
            params,
            market,
            window,
            initial_cash,
            role,
            layout,
            normalizer,
            comm,
            partner,
            state: None,
            day: None,
            sharpe: 0.0,
        }
    }

    /// Trains the trading agent against a frozen hedger.
    #[allow(clippy::too_many_arguments)]
    pub fn for_trader(
        params: &'a EngineParams,
        market: &'a MarketContext,
        window: Range<usize>,
        initial_cash: f64,
        layout: ObservationLayout,
        hidden_dim: usize,
        hedger: &'a dyn HedgeRule,
    ) -> Self {
        Self::new(
            params,
            market,
            window,
            initial_cash,
            AgentRole::Trading,
            layout,
            hidden_dim,
            Partner::Hedger(hedger),
        )
    }

    /// Trains a hedging agent against a frozen trader.
    pub fn for_hedger(
        params: &'a EngineParams,
        market: &'a MarketContext,
        window: Range<usize>,
        initial_cash: f64,
        hidden_dim: usize,
        trader: &'a dyn TradeRule,
    ) -> Self {
        Self::new(
            params,
            market,
            window,
            initial_cash,
            AgentRole::Hedging,
            ObservationLayout::Full,
            hidden_dim,
            Partner::Trader(trader),
        )
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn layout(&self) -> ObservationLayout {
        self.layout
    }

    /// Opens day `index`, runs the partner's earlier phase if it has one, and
    /// returns the learner's observation.
    fn open_day(&mut self, index: usize) -> Result<Vec<f64>, Error> {
        let state = self.state.as_ref().expect("state initialized");
        let mut day = DayProgress::begin(self.params, self.market, state, index)?;
        if let Partner::Trader(trader) = self.partner {
            let decision = trader.trade(&day.view(self.params, self.market))?;
            day.trade(self.params, self.market, decision)?;
        }
        let view = day.view(self.params, self.market);
        let inbox = view.board.inbox(self.role);
        let obs = build_observation(self.layout, &view.inputs, &self.normalizer, self.comm.as_ref(), &inbox)?;
        self.day = Some(day);
        Ok(obs)
    }

    fn advance(&mut self, action: f64, hidden: &[f64]) -> Result<Step, Error> {
        let mut day = self
            .day
            .take()
            .ok_or_else(|| Error::Run("step called before reset".into()))?;
        let summary = self.comm.as_ref().map(|c| c.summary(hidden));
        match self.partner {
            Partner::Hedger(hedger) => {
                day.trade(
                    self.params,
                    self.market,
                    Decision {
                        action: TradingAction::new(action.clamp(-1.0, 1.0))?,
                        summary,
                    },
                )?;
                let decision = hedger.hedge(&day.view(self.params, self.market))?;
                day.hedge(self.params, self.market, decision)?;
            }
            Partner::Trader(_) => {
                day.hedge(
                    self.params,
                    self.market,
                    Decision {
                        action: Some(HedgeRatio::new(action.clamp(0.0, 1.0))?),
                        summary,
                    },
                )?;
            }
        }
        let index = day.index();
        let (state, ctx) = day.finish(self.params, self.market)?;
        self.state = Some(state);
        self.sharpe = ctx.sharpe;
        let done = index + 1 >= self.window.end;
        let obs = if done {
            vec![0.0; self.layout.dim()]
        } else {
            self.open_day(index + 1)?
        };
        Ok(Step {
            obs,
            reward: ctx.reward,
            done,
        })
    }
}

impl Env for PortfolioEnv<'_> {
    fn obs_dim(&self) -> usize {
        self.layout.dim()
    }

    fn squash(&self) -> Squash {
        self.role.squash()
    }

    fn reset(&mut self) -> Result<Vec<f64>, RlError> {
        if self.window.is_empty() {
            return Err(RlError::Env("empty training window".into()));
        }
        let start = self.market.slice(self.window.start).date;
        self.state = Some(EngineState::new(start, self.initial_cash, self.params));
        self.sharpe = 0.0;
        self.open_day(self.window.start).map_err(env_err)
    }

    fn step(&mut self, action: f64, hidden: &[f64]) -> Result<Step, RlError> {
        self.advance(action, hidden).map_err(env_err)
    }

    fn sharpe(&self) -> f64 {
        self.sharpe
    }
}
