//! Trading and hedging agents: action types, hedge sizing, observations and
//! the message exchange between the two.

use std::collections::VecDeque;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rl::{Act, ActMode, PolicyParams, RlError, Squash};

/// Length of an inter-agent message.
pub const D_MSG: usize = 8;
/// Number of the other agent's most recent messages attended over.
pub const INBOX_WINDOW: usize = 5;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("trading action {0} outside [-1, 1]")]
    TradingAction(f64),
    #[error("hedge ratio {0} outside [0, 1]")]
    HedgeRatio(f64),
    #[error("put delta must be negative, got {0}")]
    PutDelta(f64),
    #[error("message summary must have {expected} finite entries, got {got}")]
    Message { expected: usize, got: usize },
    #[error("observation has non-finite entry at {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Policy(#[from] RlError),
}

/// Equity allocation in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TradingAction(f64);

impl TradingAction {
    pub fn new(a: f64) -> Result<Self, AgentError> {
        if (-1.0..=1.0).contains(&a) {
            Ok(Self(a))
        } else {
            Err(AgentError::TradingAction(a))
        }
    }

    pub const fn hold() -> Self {
        Self(0.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Fraction of the equity delta to neutralize, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct HedgeRatio(f64);

impl HedgeRatio {
    pub fn new(alpha: f64) -> Result<Self, AgentError> {
        if (0.0..=1.0).contains(&alpha) {
            Ok(Self(alpha))
        } else {
            Err(AgentError::HedgeRatio(alpha))
        }
    }

    pub const fn none() -> Self {
        Self(0.0)
    }

    pub const fn full() -> Self {
        Self(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Trading,
    Hedging,
}

impl AgentRole {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Trading => "trading",
            AgentRole::Hedging => "hedging",
        }
    }

    pub fn other(self) -> Self {
        match self {
            AgentRole::Trading => AgentRole::Hedging,
            AgentRole::Hedging => AgentRole::Trading,
        }
    }

    pub fn squash(self) -> Squash {
        match self {
            AgentRole::Trading => Squash::Tanh,
            AgentRole::Hedging => Squash::Sigmoid,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "trading" => Some(AgentRole::Trading),
            "hedging" => Some(AgentRole::Hedging),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub date: NaiveDate,
    pub sender: AgentRole,
    pub summary: Vec<f64>,
}

impl AgentMessage {
    pub fn new(date: NaiveDate, sender: AgentRole, summary: Vec<f64>) -> Result<Self, AgentError> {
        if summary.len() != D_MSG || summary.iter().any(|x| !x.is_finite()) {
            return Err(AgentError::Message {
                expected: D_MSG,
                got: summary.len(),
            });
        }
        Ok(Self { date, sender, summary })
    }
}

/// Per-sender ring buffers of the last [`INBOX_WINDOW`] messages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MessageBoard {
    trading: VecDeque<AgentMessage>,
    hedging: VecDeque<AgentMessage>,
}

impl MessageBoard {
    pub fn post(&mut self, msg: AgentMessage) {
        let queue = match msg.sender {
            AgentRole::Trading => &mut self.trading,
            AgentRole::Hedging => &mut self.hedging,
        };
        if queue.len() == INBOX_WINDOW {
            queue.pop_front();
        }
        queue.push_back(msg);
    }

    /// Messages addressed to `receiver`, oldest first.
    pub fn inbox(&self, receiver: AgentRole) -> Vec<&AgentMessage> {
        match receiver.other() {
            AgentRole::Trading => self.trading.iter().collect(),
            AgentRole::Hedging => self.hedging.iter().collect(),
        }
    }

    pub fn clear(&mut self) {
        self.trading.clear();
        self.hedging.clear();
    }
}

/// Softmax of `q·kᵢ/√d` over the inbox summaries.
pub fn attention_weights(inbox: &[&[f64]], query: &[f64]) -> Vec<f64> {
    if inbox.is_empty() {
        return Vec::new();
    }
    let scale = (query.len() as f64).sqrt();
    let scores: Vec<f64> = inbox
        .iter()
        .map(|k| k.iter().zip(query).map(|(a, b)| a * b).sum::<f64>() / scale)
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Attention-weighted average of the inbox summaries, zero when empty.
pub fn exchange_context(inbox: &[&[f64]], query: &[f64]) -> Vec<f64> {
    let mut context = vec![0.0; query.len()];
    if inbox.len() == 1 {
        context.copy_from_slice(inbox[0]);
        return context;
    }
    for (w, m) in attention_weights(inbox, query).iter().zip(inbox) {
        for (c, x) in context.iter_mut().zip(m.iter()) {
            *c += w * x;
        }
    }
    context
}

/// Whole contracts bringing `h` shares to the target hedge, `round(α·h/(|Δ|·M))`.
pub fn target_put_contracts(
    alpha: HedgeRatio,
    shares: u64,
    delta_put: f64,
    multiplier: u32,
) -> Result<u64, AgentError> {
    if delta_put.is_nan() || delta_put >= 0.0 {
        return Err(AgentError::PutDelta(delta_put));
    }
    if shares == 0 || alpha.value() == 0.0 {
        return Ok(0);
    }
    Ok((alpha.value() * shares as f64 / (delta_put.abs() * f64::from(multiplier))).round() as u64)
}

/// Real-valued contracts at unit multiplier, `α·h/|Δ|`.
pub fn fractional_put_contracts(alpha: HedgeRatio, shares: f64, delta_put: f64) -> Result<f64, AgentError> {
    if delta_put.is_nan() || delta_put >= 0.0 {
        return Err(AgentError::PutDelta(delta_put));
    }
    Ok(alpha.value() * shares / -delta_put)
}

/// Feature set of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationLayout {
    /// Market, option and portfolio features plus the message context.
    Full,
    /// Equity-only features without option data or messages.
    EquityOnly,
}

impl ObservationLayout {
    /// Features that get z-scored.
    pub fn market_dim(self) -> usize {
        match self {
            ObservationLayout::Full => 8,
            ObservationLayout::EquityOnly => 4,
        }
    }

    pub fn portfolio_dim(self) -> usize {
        match self {
            ObservationLayout::Full => 3,
            ObservationLayout::EquityOnly => 2,
        }
    }

    pub fn base_dim(self) -> usize {
        self.market_dim() + self.portfolio_dim()
    }

    pub fn context_dim(self) -> usize {
        match self {
            ObservationLayout::Full => D_MSG,
            ObservationLayout::EquityOnly => 0,
        }
    }

    pub fn dim(self) -> usize {
        self.base_dim() + self.context_dim()
    }
}

/// Features of the put the hedger would trade today.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionFeatures {
    /// `K/S − 1`.
    pub strike_distance: f64,
    pub dte: i64,
    pub mid: f64,
    pub delta: f64,
}

/// Raw inputs of one observation, all dated `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationInputs {
    pub close: f64,
    pub shares: u64,
    pub cash: f64,
    pub value: f64,
    pub covered_shares: u64,
    pub option: Option<OptionFeatures>,
    pub forecast: f64,
    pub sentiment: f64,
    pub vix: f64,
}

impl ObservationInputs {
    /// Unnormalized market features in layout order.
    pub fn market_features(&self, layout: ObservationLayout) -> Vec<f64> {
        match layout {
            ObservationLayout::Full => {
                let o = self.option.unwrap_or(OptionFeatures {
                    strike_distance: 0.0,
                    dte: 0,
                    mid: 0.0,
                    delta: 0.0,
                });
                vec![
                    self.close,
                    o.strike_distance,
                    o.dte as f64 / 30.0,
                    o.mid / self.close,
                    o.delta,
                    self.forecast,
                    self.sentiment,
                    self.vix,
                ]
            }
            ObservationLayout::EquityOnly => vec![self.close, self.forecast, self.sentiment, self.vix],
        }
    }

    /// Equity weight, cash weight and (full layout) hedge coverage.
    pub fn portfolio_features(&self, layout: ObservationLayout) -> Vec<f64> {
        let v = if self.value > 0.0 { self.value } else { 1.0 };
        let mut out = vec![self.close * self.shares as f64 / v, self.cash / v];
        if layout == ObservationLayout::Full {
            out.push(if self.shares == 0 {
                0.0
            } else {
                self.covered_shares as f64 / self.shares as f64
            });
        }
        out
    }
}

/// Per-feature z-score statistics, fitted once on a training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Population statistics; near-constant features get unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.is_empty() {
            return Self::identity(dim);
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x / n;
            }
        }
        let mut std = vec![0.0; dim];
        for r in rows {
            for ((s, x), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (x - m) * (x - m) / n;
            }
        }
        for s in &mut std {
            *s = if s.sqrt() > 1e-8 { s.sqrt() } else { 1.0 };
        }
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Fixed seeded projections used by the message exchange: the query maps an
/// agent's base features to `D_MSG`, the message map sends its last hidden
/// layer to a `D_MSG` summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommProjection {
    pub base_dim: usize,
    pub hidden_dim: usize,
    pub query: Vec<f64>,
    pub message: Vec<f64>,
}

impl CommProjection {
    pub fn new(base_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qs = 1.0 / (base_dim.max(1) as f64).sqrt();
        let ms = 1.0 / (hidden_dim.max(1) as f64).sqrt();
        let query = (0..D_MSG * base_dim).map(|_| rng.random_range(-qs..=qs)).collect();
        let message = (0..D_MSG * hidden_dim).map(|_| rng.random_range(-ms..=ms)).collect();
        Self {
            base_dim,
            hidden_dim,
            query,
            message,
        }
    }

    /// The fixed projection pair of `role`.
    pub fn for_role(role: AgentRole, base_dim: usize, hidden_dim: usize) -> Self {
        let seed = match role {
            AgentRole::Trading => 0x7472_6164,
            AgentRole::Hedging => 0x6865_6467,
        };
        Self::new(base_dim, hidden_dim, seed)
    }

    fn project(w: &[f64], x: &[f64]) -> Vec<f64> {
        w.chunks(x.len().max(1))
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn query(&self, base: &[f64]) -> Vec<f64> {
        if self.base_dim == 0 {
            return vec![0.0; D_MSG];
        }
        Self::project(&self.query, base)
    }

    pub fn summary(&self, hidden: &[f64]) -> Vec<f64> {
        if self.hidden_dim == 0 {
            return vec![0.0; D_MSG];
        }
        Self::project(&self.message, hidden)
    }
}

/// Normalized observation: z-scored market features, raw portfolio
/// features, then (full layout) the attention context over `inbox`.
pub fn build_observation(
    layout: ObservationLayout,
    inputs: &ObservationInputs,
    normalizer: &Normalizer,
    comm: Option<&CommProjection>,
    inbox: &[&AgentMessage],
) -> Result<Vec<f64>, AgentError> {
    let mut obs = normalizer.apply(&inputs.market_features(layout));
    obs.extend(inputs.portfolio_features(layout));
    if layout.context_dim() > 0 {
        let context = match comm {
            Some(comm) if !inbox.is_empty() => {
                let keys: Vec<&[f64]> = inbox
                    .iter()
                    .rev()
                    .take(INBOX_WINDOW)
                    .rev()
                    .map(|m| m.summary.as_slice())
                    .collect();
                exchange_context(&keys, &comm.query(&obs))
            }
            _ => vec![0.0; D_MSG],
        };
        obs.extend(context);
    }
    if let Some(i) = obs.iter().position(|x| !x.is_finite()) {
        return Err(AgentError::NonFinite(i));
    }
    Ok(obs)
}

/// A deployable agent: actor weights plus everything needed to rebuild its
/// observations.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPolicy {
    pub role: AgentRole,
    pub layout: ObservationLayout,
    pub normalizer: Normalizer,
    pub params: PolicyParams,
}

impl AgentPolicy {
    pub fn act(&self, obs: &[f64], mode: ActMode<'_>, exploration_sigma: f64) -> Result<Act, AgentError> {
        Ok(self.params.act(obs, self.role.squash(), mode, exploration_sigma)?)
    }
}

/// Tanh-squashed allocation plus the acting network's last hidden layer.
pub fn trading_policy_act(
    obs: &[f64],
    policy: &PolicyParams,
    mode: ActMode<'_>,
) -> Result<(TradingAction, Vec<f64>), AgentError> {
    let act = policy.act(obs, Squash::Tanh, mode, 0.1)?;
    Ok((TradingAction::new(act.action.clamp(-1.0, 1.0))?, act.hidden))
}

/// Sigmoid-squashed hedge ratio plus the last hidden layer.
pub fn hedging_policy_act(
    obs: &[f64],
    policy: &PolicyParams,
    mode: ActMode<'_>,
) -> Result<(HedgeRatio, Vec<f64>), AgentError> {
    let act = policy.act(obs, Squash::Sigmoid, mode, 0.1)?;
    Ok((HedgeRatio::new(act.action.clamp(0.0, 1.0))?, act.hidden))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::approximator::ArchDescriptor;
    use crate::rl::LearnerKind;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, day).unwrap()
    }

    #[test]
    fn action_ranges_are_enforced() {
        assert!(TradingAction::new(1.0).is_ok());
        assert!(TradingAction::new(-1.0001).is_err());
        assert!(TradingAction::new(f64::NAN).is_err());
        assert!(HedgeRatio::new(0.0).is_ok());
        assert!(HedgeRatio::new(1.2).is_err());
    }

    #[test]
    fn contract_sizing() {
        let full = HedgeRatio::full();
        assert_eq!(target_put_contracts(full, 200, -0.5, 100).unwrap(), 4);
        assert_eq!(target_put_contracts(HedgeRatio::none(), 200, -0.5, 100).unwrap(), 0);
        assert_eq!(target_put_contracts(full, 0, -0.5, 100).unwrap(), 0);
        assert!(matches!(
            target_put_contracts(full, 200, 0.0, 100),
            Err(AgentError::PutDelta(_))
        ));
        let n = fractional_put_contracts(full, 137.0, -0.37).unwrap();
        assert_eq!(137.0 + n * -0.37, 0.0);
    }

    #[test]
    fn singleton_and_identical_inboxes() {
        let m = [0.3, -1.0, 2.0, 0.0, 0.5, 0.1, -0.2, 0.9];
        let q = [1.0; D_MSG];
        assert_eq!(exchange_context(&[&m], &q), m.to_vec());
        let c = exchange_context(&[&m, &m], &q);
        for (a, b) in c.iter().zip(&m) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(exchange_context(&[], &q), vec![0.0; D_MSG]);
    }

    #[test]
    fn board_keeps_window_per_sender() {
        let mut board = MessageBoard::default();
        for day in 1..=7 {
            board.post(AgentMessage::new(d(day), AgentRole::Hedging, vec![day as f64; D_MSG]).unwrap());
        }
        let inbox = board.inbox(AgentRole::Trading);
        assert_eq!(inbox.len(), INBOX_WINDOW);
        assert_eq!(inbox[0].date, d(3));
        assert!(board.inbox(AgentRole::Hedging).is_empty());
        assert!(AgentMessage::new(d(1), AgentRole::Trading, vec![0.0; 3]).is_err());
    }

    #[test]
    fn zero_policy_actions() {
        let arch = ArchDescriptor::new(4, &[8], 1).unwrap();
        let p = PolicyParams::zeros(arch, LearnerKind::ClippedPg);
        let obs = [0.3, 0.1, -2.0, 5.0];
        assert_eq!(trading_policy_act(&obs, &p, ActMode::Eval).unwrap().0.value(), 0.0);
        assert_eq!(hedging_policy_act(&obs, &p, ActMode::Eval).unwrap().0.value(), 0.5);
        assert!(trading_policy_act(&[0.0; 3], &p, ActMode::Eval).is_err());
    }

    #[test]
    fn normalizer_and_observation_shape() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let n = Normalizer::fit(&rows);
        assert_eq!(n.mean, vec![2.0, 5.0]);
        assert_eq!(n.std, vec![1.0, 1.0]);
        assert_eq!(n.apply(&[3.0, 6.0]), vec![1.0, 1.0]);

        let inputs = ObservationInputs {
            close: 100.0,
            shares: 10,
            cash: 9000.0,
            value: 10000.0,
            covered_shares: 0,
            option: None,
            forecast: 0.0,
            sentiment: 50.0,
            vix: 20.0,
        };
        for layout in [ObservationLayout::Full, ObservationLayout::EquityOnly] {
            let norm = Normalizer::identity(layout.market_dim());
            let obs = build_observation(layout, &inputs, &norm, None, &[]).unwrap();
            assert_eq!(obs.len(), layout.dim());
        }
        let norm = Normalizer::identity(8);
        let obs = build_observation(ObservationLayout::Full, &inputs, &norm, None, &[]).unwrap();
        assert_eq!(&obs[11..], &[0.0; D_MSG]);
        assert_eq!(obs[8], 0.1);
    }
}
