//! Shared-reward environment contract, the rolling-Sharpe reward, the policy
//! approximator and three actor-critic learners trained against it.

pub mod approximator;
pub mod learners;
pub mod optim;
pub mod policy;
pub mod sharpe;
pub mod toy;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use learners::train_learner;
pub use policy::{Act, ActMode, LearnerKind, PolicyParams, Squash};
pub use sharpe::{reward_step, rolling_sharpe, SharpeTracker};

#[derive(Debug, Error)]
pub enum RlError {
    #[error("{what} dimension mismatch: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("environment step failed: {0}")]
    Env(String),
}

/// One step of experience.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: f64,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Daily step contract: observation → action → shared reward.
pub trait Env {
    fn obs_dim(&self) -> usize;
    fn squash(&self) -> Squash;
    fn reset(&mut self) -> Result<Vec<f64>, RlError>;
    /// `hidden` is the acting network's last hidden layer, used by
    /// environments that forward it as an inter-agent message.
    fn step(&mut self, action: f64, hidden: &[f64]) -> Result<Step, RlError>;
    /// Current Sharpe ratio of the episode, for logging.
    fn sharpe(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub clip: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    /// Rollout length for the clipped learner.
    pub rollout_len: usize,
    pub epochs: usize,
    pub batch: usize,
    /// Steps per update for the advantage learner.
    pub n_steps: usize,
    pub replay: usize,
    pub tau: f64,
    pub exploration_sigma: f64,
    pub learning_starts: usize,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub init_log_std: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            gamma: 0.99,
            clip: 0.2,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            rollout_len: 512,
            epochs: 10,
            batch: 64,
            n_steps: 5,
            replay: 10_000,
            tau: 0.005,
            exploration_sigma: 0.1,
            learning_starts: 100,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            init_log_std: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainingLogRow {
    pub step: usize,
    pub episode: usize,
    pub reward: f64,
    #[serde(rename = "SR")]
    pub sharpe: f64,
}

/// Per-episode training log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<TrainingLogRow>,
}

impl TrainingLog {
    pub fn write_csv<W: Write>(&self, dst: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(dst);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(["step", "episode", "reward", "SR"])?;
        }
        w.flush()
    }
}

/// `agent,step,episode,reward,SR` across several labeled logs.
pub fn write_training_logs<W: Write>(dst: W, logs: &[(String, TrainingLog)]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(dst);
    w.write_record(["agent", "step", "episode", "reward", "SR"])?;
    for (agent, log) in logs {
        for r in &log.rows {
            w.write_record([
                agent.clone(),
                r.step.to_string(),
                r.episode.to_string(),
                r.reward.to_string(),
                r.sharpe.to_string(),
            ])?;
        }
    }
    w.flush()
}

/// Tracks episode boundaries while a learner interacts with an env.
#[derive(Debug, Default)]
pub(crate) struct EpisodeCounter {
    episode: usize,
    reward: f64,
}

impl EpisodeCounter {
    pub(crate) fn record(
        &mut self,
        step: usize,
        reward: f64,
        done: bool,
        sharpe: f64,
        log: &mut Option<&mut TrainingLog>,
    ) {
        self.reward += reward;
        if done {
            if let Some(log) = log.as_deref_mut() {
                log.rows.push(TrainingLogRow {
                    step,
                    episode: self.episode,
                    reward: self.reward,
                    sharpe,
                });
            }
            self.episode += 1;
            self.reward = 0.0;
        }
    }
}

/// Total reward of each of `episodes` evaluation episodes.
pub fn evaluate_episodes(env: &mut dyn Env, policy: &PolicyParams, episodes: usize) -> Result<Vec<f64>, RlError> {
    let squash = env.squash();
    let mut totals = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset()?;
        let mut total = 0.0;
        loop {
            let act = policy.act(&obs, squash, ActMode::Eval, 0.0)?;
            let step = env.step(act.action, &act.hidden)?;
            total += step.reward;
            if step.done {
                break;
            }
            obs = step.obs;
        }
        totals.push(total);
    }
    Ok(totals)
}

/// Mixes a master seed with job coordinates (splitmix64 finalizer).
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut z = master;
    for &p in parts {
        z = z
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(p.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}
