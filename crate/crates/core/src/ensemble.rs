//! Quarterly walk-forward protocol for the hedging candidates: train on the
//! lookback window, score on the following validation window, deploy the
//! best scorer until the next boundary.

use std::io::Write;
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::agents::{AgentPolicy, AgentRole, ObservationLayout};
use crate::coordinator::{simulate, EngineParams, HedgeRule, MarketContext, PolicyHedger, PortfolioEnv, TradeRule};
use crate::error::Result;
use crate::portfolio::CostModel;
use crate::rl::{derive_seed, train_learner, Hyperparams, LearnerKind, TrainingLog};
use crate::scalar::{mean, sample_std};

/// Trading-day lengths of the retraining cycle and its windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrainSchedule {
    pub cycle: usize,
    pub lookback: usize,
    pub validation: usize,
}

impl Default for RetrainSchedule {
    fn default() -> Self {
        Self {
            cycle: 63,
            lookback: 90,
            validation: 30,
        }
    }
}

impl RetrainSchedule {
    pub fn required_history(&self) -> usize {
        self.lookback + self.validation
    }

    /// Training and validation index ranges for a deployment starting at
    /// `deploy`; both end strictly before it.
    pub fn windows(&self, deploy: usize) -> Option<(Range<usize>, Range<usize>)> {
        let start = deploy.checked_sub(self.required_history())?;
        let split = start + self.lookback;
        Some((start..split, split..deploy))
    }

    /// Deployment intervals covering `test`, one per cycle boundary.
    pub fn cycles(&self, test: Range<usize>) -> Vec<Range<usize>> {
        let step = self.cycle.max(1);
        (test.start..test.end)
            .step_by(step)
            .map(|s| s..(s + step).min(test.end))
            .collect()
    }
}

/// Cycle index of every day in `test`; the policy deployed on a day is the
/// one selected at the start of its cycle.
pub fn deployment_loop(schedule: &RetrainSchedule, test: Range<usize>) -> Vec<usize> {
    schedule
        .cycles(test)
        .iter()
        .enumerate()
        .flat_map(|(c, r)| std::iter::repeat_n(c, r.len()))
        .collect()
}

/// `mean(r) / std(r)` with the sample std; `None` when degenerate.
pub fn validation_metric(returns: &[f64]) -> Option<f64> {
    let sd = sample_std(returns)?;
    (sd >= 1e-12).then(|| mean(returns) / sd)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub kind: LearnerKind,
    pub policy: AgentPolicy,
    pub validation_returns: Vec<f64>,
    pub metric: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub index: usize,
    /// Another candidate had the same metric and lost on learner order.
    pub tie: bool,
}

/// Strict argmax over the defined metrics, ties broken by learner order.
pub fn select_active(candidates: &[(LearnerKind, Option<f64>)]) -> Option<Selection> {
    let mut best: Option<(usize, f64)> = None;
    let mut tie = false;
    for (i, (kind, m)) in candidates.iter().enumerate() {
        let Some(m) = *m else { continue };
        match best {
            None => best = Some((i, m)),
            Some((j, bm)) => {
                if m > bm || (m == bm && *kind < candidates[j].0) {
                    tie = m == bm;
                    best = Some((i, m));
                } else if m == bm {
                    tie = true;
                }
            }
        }
    }
    best.map(|(index, _)| Selection { index, tie })
}

/// One row of `selections.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRow {
    pub cycle_start: NaiveDate,
    pub candidate: String,
    pub metric: Option<f64>,
    pub selected: bool,
}

/// `cycle_start,candidate,metric,selected`.
pub fn write_selections<W: Write>(dst: W, rows: &[SelectionRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(dst);
    w.write_record(["cycle_start", "candidate", "metric", "selected"])?;
    for r in rows {
        w.write_record([
            r.cycle_start.to_string(),
            r.candidate.clone(),
            r.metric.map(|m| format!("{m}")).unwrap_or_default(),
            r.selected.to_string(),
        ])?;
    }
    w.flush()
}

/// Training settings shared by every job of a cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSettings {
    pub hp: Hyperparams,
    pub timesteps: usize,
    pub initial_cash: f64,
    /// Charge transaction costs during validation.
    pub validation_costs: bool,
}

/// Trains a trading agent on `window` against a frozen hedger.
#[allow(clippy::too_many_arguments)]
pub fn train_trader(
    params: &EngineParams,
    market: &MarketContext,
    window: Range<usize>,
    layout: ObservationLayout,
    hedger: &dyn HedgeRule,
    kind: LearnerKind,
    settings: &TrainingSettings,
    seed: u64,
    log: Option<&mut TrainingLog>,
) -> Result<AgentPolicy> {
    let hidden = settings.hp.hidden.last().copied().unwrap_or(0);
    let mut env = PortfolioEnv::for_trader(
        params,
        market,
        window.clone(),
        settings.initial_cash,
        layout,
        hidden,
        hedger,
    );
    let mut policy = train_learner(&mut env, kind, &settings.hp, settings.timesteps, seed, log)?;
    policy.training_window = Some((market.slice(window.start).date, market.slice(window.end - 1).date));
    Ok(AgentPolicy {
        role: AgentRole::Trading,
        layout,
        normalizer: env.normalizer().clone(),
        params: policy,
    })
}

/// Trains a hedging agent on `window` against a frozen trader.
#[allow(clippy::too_many_arguments)]
pub fn train_hedger(
    params: &EngineParams,
    market: &MarketContext,
    window: Range<usize>,
    trader: &dyn TradeRule,
    kind: LearnerKind,
    settings: &TrainingSettings,
    seed: u64,
    log: Option<&mut TrainingLog>,
) -> Result<AgentPolicy> {
    let hidden = settings.hp.hidden.last().copied().unwrap_or(0);
    let mut env = PortfolioEnv::for_hedger(params, market, window.clone(), settings.initial_cash, hidden, trader);
    let mut policy = train_learner(&mut env, kind, &settings.hp, settings.timesteps, seed, log)?;
    policy.training_window = Some((market.slice(window.start).date, market.slice(window.end - 1).date));
    Ok(AgentPolicy {
        role: AgentRole::Hedging,
        layout: ObservationLayout::Full,
        normalizer: env.normalizer().clone(),
        params: policy,
    })
}

/// Daily returns of `hedger` over `window`, from fresh cash, with the
/// trading agent frozen.
pub fn validation_returns(
    params: &EngineParams,
    market: &MarketContext,
    window: Range<usize>,
    trader: &dyn TradeRule,
    hedger: &dyn HedgeRule,
    settings: &TrainingSettings,
) -> Result<Vec<f64>> {
    let mut p = *params;
    if !settings.validation_costs {
        p.costs = CostModel::zero();
    }
    let days = simulate(&p, market, window, settings.initial_cash, trader, hedger)?;
    Ok(days.iter().filter_map(|d| d.ret).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    pub results: Vec<CandidateResult>,
    pub selected: Option<Selection>,
}

impl CycleOutcome {
    pub fn active(&self) -> Option<&CandidateResult> {
        self.selected.map(|s| &self.results[s.index])
    }
}

/// Trains every candidate on the lookback window preceding `deploy` and
/// scores it on the validation window. `None` when history is too short.
#[allow(clippy::too_many_arguments)]
pub fn run_cycle(
    params: &EngineParams,
    market: &MarketContext,
    schedule: &RetrainSchedule,
    deploy: usize,
    trader: &dyn TradeRule,
    kinds: &[LearnerKind],
    settings: &TrainingSettings,
    seed: u64,
) -> Result<Option<CycleOutcome>> {
    let Some((train, validation)) = schedule.windows(deploy) else {
        return Ok(None);
    };
    let mut results = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let job_seed = derive_seed(seed, &[deploy as u64, kind as u64 + 1]);
        let policy = train_hedger(params, market, train.clone(), trader, kind, settings, job_seed, None)?;
        let hedger = PolicyHedger::new(policy.clone());
        let returns = validation_returns(params, market, validation.clone(), trader, &hedger, settings)?;
        results.push(CandidateResult {
            kind,
            policy,
            metric: validation_metric(&returns),
            validation_returns: returns,
        });
    }
    let keyed: Vec<(LearnerKind, Option<f64>)> = results.iter().map(|r| (r.kind, r.metric)).collect();
    let selected = select_active(&keyed);
    Ok(Some(CycleOutcome { results, selected }))
}
