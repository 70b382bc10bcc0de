use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::approximator::{ArchDescriptor, Mlp};
use super::RlError;

/// Learner families, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// PPO-style clipped surrogate, on-policy.
    ClippedPg,
    /// n-step advantage actor-critic (A2C-style).
    AdvantageAc,
    /// Deterministic actor with replay and target networks (DDPG-style).
    DeterministicAc,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 3] = [
        LearnerKind::ClippedPg,
        LearnerKind::AdvantageAc,
        LearnerKind::DeterministicAc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::ClippedPg => "clipped_pg",
            LearnerKind::AdvantageAc => "advantage_ac",
            LearnerKind::DeterministicAc => "deterministic_ac",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "clipped_pg" | "ppo" => Some(LearnerKind::ClippedPg),
            "advantage_ac" | "a2c" => Some(LearnerKind::AdvantageAc),
            "deterministic_ac" | "ddpg" => Some(LearnerKind::DeterministicAc),
            _ => None,
        }
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Map from the actor's real-valued output to the legal action range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Squash {
    /// `[-1, 1]`.
    Tanh,
    /// `[0, 1]`.
    Sigmoid,
}

impl Squash {
    pub fn apply(self, u: f64) -> f64 {
        match self {
            Squash::Tanh => u.tanh(),
            Squash::Sigmoid => {
                if u >= 0.0 {
                    1.0 / (1.0 + (-u).exp())
                } else {
                    let e = u.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Squash::Tanh => {
                let t = u.tanh();
                1.0 - t * t
            }
            Squash::Sigmoid => {
                let s = self.apply(u);
                s * (1.0 - s)
            }
        }
    }

    pub fn bounds(self) -> (f64, f64) {
        match self {
            Squash::Tanh => (-1.0, 1.0),
            Squash::Sigmoid => (0.0, 1.0),
        }
    }
}

/// A trained (or initial) actor: the unit of checkpointing and selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub arch: ArchDescriptor,
    pub weights: Vec<f64>,
    /// Log standard deviation of the Gaussian exploration on the pre-squash
    /// output (ignored by the deterministic learner).
    pub log_std: f64,
    pub kind: LearnerKind,
    pub seed: u64,
    pub training_window: Option<(NaiveDate, NaiveDate)>,
}

/// Evaluation is deterministic; training draws seeded noise.
pub enum ActMode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Act {
    pub action: f64,
    pub pre_squash: f64,
    pub hidden: Vec<f64>,
}

/// Xavier-uniform weights, zero biases; `out_gain` scales the output layer.
pub fn init_weights(arch: &ArchDescriptor, rng: &mut ChaCha8Rng, out_gain: f64) -> Vec<f64> {
    let mut params = Vec::with_capacity(arch.param_count());
    let n_layers = arch.layers.len() - 1;
    for (l, w) in arch.layers.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() * if l + 1 == n_layers { out_gain } else { 1.0 };
        for _ in 0..fan_in * fan_out {
            params.push(rng.random_range(-limit..=limit));
        }
        params.extend(std::iter::repeat_n(0.0, fan_out));
    }
    params
}

pub const ACTOR_OUT_GAIN: f64 = 0.01;

impl PolicyParams {
    pub fn init(arch: ArchDescriptor, kind: LearnerKind, seed: u64, log_std: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = init_weights(&arch, &mut rng, ACTOR_OUT_GAIN);
        Self {
            arch,
            weights,
            log_std,
            kind,
            seed,
            training_window: None,
        }
    }

    pub fn zeros(arch: ArchDescriptor, kind: LearnerKind) -> Self {
        let weights = vec![0.0; arch.param_count()];
        Self {
            arch,
            weights,
            log_std: 0.0,
            kind,
            seed: 0,
            training_window: None,
        }
    }

    pub fn validate(&self) -> Result<(), RlError> {
        if self.weights.len() != self.arch.param_count() {
            return Err(RlError::Dimension {
                what: "policy parameters",
                expected: self.arch.param_count(),
                got: self.weights.len(),
            });
        }
        Ok(())
    }

    pub fn net(&self) -> Mlp<f64> {
        Mlp::new(self.arch.clone())
    }

    /// Squashed action, its pre-squash value and the last hidden layer.
    pub fn act(&self, obs: &[f64], squash: Squash, mode: ActMode<'_>, exploration_sigma: f64) -> Result<Act, RlError> {
        let trace = self.net().forward_trace(&self.weights, obs)?;
        let mean = trace.output()[0];
        let hidden = trace.last_hidden().to_vec();
        let (lo, hi) = squash.bounds();
        let (pre_squash, action) = match mode {
            ActMode::Eval => (mean, squash.apply(mean)),
            ActMode::Train(rng) => {
                let z: f64 = rng.sample(StandardNormal);
                match self.kind {
                    LearnerKind::DeterministicAc => {
                        let a = (squash.apply(mean) + exploration_sigma * z).clamp(lo, hi);
                        (mean, a)
                    }
                    _ => {
                        let u = mean + self.log_std.exp() * z;
                        (u, squash.apply(u))
                    }
                }
            }
        };
        Ok(Act {
            action: action.clamp(lo, hi),
            pre_squash,
            hidden,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squash_ranges() {
        for &u in &[-1e6, -30.0, -1.0, 0.0, 0.5, 30.0, 1e6] {
            let t = Squash::Tanh.apply(u);
            let s = Squash::Sigmoid.apply(u);
            assert!((-1.0..=1.0).contains(&t) && (0.0..=1.0).contains(&s));
        }
        assert_eq!(Squash::Tanh.apply(0.0), 0.0);
        assert_eq!(Squash::Sigmoid.apply(0.0), 0.5);
    }

    #[test]
    fn squash_derivatives() {
        for sq in [Squash::Tanh, Squash::Sigmoid] {
            for &u in &[-2.0, -0.3, 0.0, 0.7, 1.9] {
                let h = 1e-6;
                let fd = (sq.apply(u + h) - sq.apply(u - h)) / (2.0 * h);
                assert!((fd - sq.derivative(u)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn init_is_seeded() {
        let arch = ArchDescriptor::new(5, &[8, 8], 1).unwrap();
        let a = PolicyParams::init(arch.clone(), LearnerKind::ClippedPg, 9, 0.0);
        let b = PolicyParams::init(arch.clone(), LearnerKind::ClippedPg, 9, 0.0);
        let c = PolicyParams::init(arch, LearnerKind::ClippedPg, 10, 0.0);
        assert_eq!(a, b);
        assert_ne!(a.weights, c.weights);
        a.validate().unwrap();
    }

    #[test]
    fn kind_order_and_names() {
        assert!(LearnerKind::ClippedPg < LearnerKind::AdvantageAc);
        assert!(LearnerKind::AdvantageAc < LearnerKind::DeterministicAc);
        for k in LearnerKind::ALL {
            assert_eq!(LearnerKind::parse(k.as_str()), Some(k));
        }
    }
}
