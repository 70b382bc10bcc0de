use crate::agents::{
    build_observation, hedging_policy_act, trading_policy_act, AgentPolicy, CommProjection, HedgeRatio,
    ObservationLayout, TradingAction,
};
use crate::error::Result;
use crate::rl::ActMode;

use super::DayView;

/// A decision plus the optional summary the deciding agent broadcasts.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision<A> {
    pub action: A,
    pub summary: Option<Vec<f64>>,
}

impl<A> Decision<A> {
    pub fn silent(action: A) -> Self {
        Self { action, summary: None }
    }
}

/// Step 4 of the day: the equity allocation.
pub trait TradeRule {
    fn trade(&self, view: &DayView<'_>) -> Result<Decision<TradingAction>>;
}

/// Step 5 of the day: the hedge ratio, or `None` to leave the book alone.
pub trait HedgeRule {
    fn hedge(&self, view: &DayView<'_>) -> Result<Decision<Option<HedgeRatio>>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HoldTrader;

impl TradeRule for HoldTrader {
    fn trade(&self, _view: &DayView<'_>) -> Result<Decision<TradingAction>> {
        Ok(Decision::silent(TradingAction::hold()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoHedge;

impl HedgeRule for NoHedge {
    fn hedge(&self, _view: &DayView<'_>) -> Result<Decision<Option<HedgeRatio>>> {
        Ok(Decision::silent(None))
    }
}

/// The observation `policy` sees today, with the attention context over
/// the other agent's recent messages.
pub fn observe(policy: &AgentPolicy, comm: Option<&CommProjection>, view: &DayView<'_>) -> Result<Vec<f64>> {
    let inbox = view.board.inbox(policy.role);
    Ok(build_observation(
        policy.layout,
        &view.inputs,
        &policy.normalizer,
        comm,
        &inbox,
    )?)
}

fn comm_for(policy: &AgentPolicy) -> Option<CommProjection> {
    (policy.layout == ObservationLayout::Full).then(|| {
        CommProjection::for_role(
            policy.role,
            policy.layout.base_dim(),
            policy.params.arch.last_hidden_dim(),
        )
    })
}

/// Deterministic trading agent.
#[derive(Debug, Clone)]
pub struct PolicyTrader {
    pub policy: AgentPolicy,
    comm: Option<CommProjection>,
}

impl PolicyTrader {
    pub fn new(policy: AgentPolicy) -> Self {
        let comm = comm_for(&policy);
        Self { policy, comm }
    }
}

impl TradeRule for PolicyTrader {
    fn trade(&self, view: &DayView<'_>) -> Result<Decision<TradingAction>> {
        let obs = observe(&self.policy, self.comm.as_ref(), view)?;
        let (action, hidden) = trading_policy_act(&obs, &self.policy.params, ActMode::Eval)?;
        Ok(Decision {
            action,
            summary: self.comm.as_ref().map(|c| c.summary(&hidden)),
        })
    }
}

/// Deterministic hedging agent.
#[derive(Debug, Clone)]
pub struct PolicyHedger {
    pub policy: AgentPolicy,
    comm: Option<CommProjection>,
}

impl PolicyHedger {
    pub fn new(policy: AgentPolicy) -> Self {
        let comm = comm_for(&policy);
        Self { policy, comm }
    }
}

impl HedgeRule for PolicyHedger {
    fn hedge(&self, view: &DayView<'_>) -> Result<Decision<Option<HedgeRatio>>> {
        let obs = observe(&self.policy, self.comm.as_ref(), view)?;
        let (alpha, hidden) = hedging_policy_act(&obs, &self.policy.params, ActMode::Eval)?;
        Ok(Decision {
            action: Some(alpha),
            summary: self.comm.as_ref().map(|c| c.summary(&hidden)),
        })
    }
}
