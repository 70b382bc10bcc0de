//! A small trending market for checking that learners improve on chance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::sharpe::{reward_step, SharpeTracker};
use super::{Env, RlError, Squash, Step};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyParams {
    pub episode_len: usize,
    /// Upward drift present in both regimes.
    pub base_drift: f64,
    /// Regime-dependent drift, added in up regimes and subtracted in down.
    pub trend_drift: f64,
    pub noise: f64,
    pub switch_prob: f64,
    pub sharpe_window: usize,
}

impl Default for ToyParams {
    fn default() -> Self {
        Self {
            episode_len: 120,
            base_drift: 0.001,
            trend_drift: 0.01,
            noise: 0.01,
            switch_prob: 0.1,
            sharpe_window: 60,
        }
    }
}

/// Observable-regime trending market without costs. The action sets market
/// exposure `(a + 1) / 2`, the reward is the change in rolling Sharpe ratio.
#[derive(Debug, Clone)]
pub struct TrendToyEnv {
    params: ToyParams,
    rng: ChaCha8Rng,
    tracker: SharpeTracker<f64>,
    up: bool,
    t: usize,
    last_return: f64,
}

impl TrendToyEnv {
    pub fn new(params: ToyParams, seed: u64) -> Self {
        let tracker = SharpeTracker::new(params.sharpe_window, 0.0);
        Self {
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            tracker,
            up: true,
            t: 0,
            last_return: 0.0,
        }
    }

    fn observe(&self) -> Vec<f64> {
        vec![if self.up { 1.0 } else { -1.0 }, self.last_return / self.params.noise]
    }
}

impl Env for TrendToyEnv {
    fn obs_dim(&self) -> usize {
        2
    }

    fn squash(&self) -> Squash {
        Squash::Tanh
    }

    fn reset(&mut self) -> Result<Vec<f64>, RlError> {
        self.tracker = SharpeTracker::new(self.params.sharpe_window, 0.0);
        self.up = self.rng.random_bool(0.5);
        self.t = 0;
        self.last_return = 0.0;
        Ok(self.observe())
    }

    fn step(&mut self, action: f64, _hidden: &[f64]) -> Result<Step, RlError> {
        if !action.is_finite() {
            return Err(RlError::Env(format!("non-finite action {action}")));
        }
        let p = &self.params;
        let exposure = (action.clamp(-1.0, 1.0) + 1.0) / 2.0;
        let z: f64 = self.rng.sample(StandardNormal);
        let drift = p.base_drift + if self.up { p.trend_drift } else { -p.trend_drift };
        let market = drift + p.noise * z;
        let prev = self.tracker.sharpe();
        self.tracker.push(exposure * market);
        let reward = reward_step(prev, self.tracker.sharpe());
        self.last_return = market;
        if self.rng.random_bool(p.switch_prob) {
            self.up = !self.up;
        }
        self.t += 1;
        Ok(Step {
            obs: self.observe(),
            reward,
            done: self.t >= p.episode_len,
        })
    }

    fn sharpe(&self) -> f64 {
        self.tracker.sharpe_or_zero()
    }
}

/// Episode rewards of a policy drawing actions uniformly on `[-1, 1]`.
pub fn random_policy_episodes(env: &mut dyn Env, episodes: usize, seed: u64) -> Result<Vec<f64>, RlError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = env.squash().bounds();
    let mut totals = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        env.reset()?;
        let mut total = 0.0;
        loop {
            let step = env.step(rng.random_range(lo..=hi), &[])?;
            total += step.reward;
            if step.done {
                break;
            }
        }
        totals.push(total);
    }
    Ok(totals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episode_reward_telescopes_to_final_sharpe() {
        let mut env = TrendToyEnv::new(ToyParams::default(), 3);
        env.reset().unwrap();
        let mut total = 0.0;
        loop {
            let s = env.step(0.2, &[]).unwrap();
            total += s.reward;
            if s.done {
                break;
            }
        }
        assert!((total - env.sharpe()).abs() < 1e-12);
    }
}
