//! Learners. Each exposes its loss/gradient as a free function so the
//! gradients can be checked against finite differences in isolation.

mod advantage_ac;
mod clipped_pg;
mod deterministic_ac;

pub use advantage_ac::{advantage_ac_loss, AdvantageAcBatch};
pub use clipped_pg::{clipped_pg_loss, ClippedPgBatch};
pub use deterministic_ac::{deterministic_actor_loss, deterministic_critic_loss, CriticBatch};

use super::approximator::ArchDescriptor;
use super::policy::{LearnerKind, PolicyParams};
use super::{Env, Hyperparams, RlError, TrainingLog};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Gaussian log-density of `u` under `N(mean, exp(log_std)^2)`.
pub(crate) fn gaussian_logp(u: f64, mean: f64, log_std: f64) -> f64 {
    let z = (u - mean) / log_std.exp();
    -0.5 * z * z - log_std - LN_SQRT_2PI
}

/// `(∂logp/∂mean, ∂logp/∂log_std)`.
pub(crate) fn gaussian_logp_grad(u: f64, mean: f64, log_std: f64) -> (f64, f64) {
    let var = (2.0 * log_std).exp();
    let diff = u - mean;
    (diff / var, diff * diff / var - 1.0)
}

pub(crate) fn actor_arch(obs_dim: usize, hp: &Hyperparams) -> Result<ArchDescriptor, RlError> {
    ArchDescriptor::new(obs_dim, &hp.hidden, 1)
}

/// Trains one policy against `env` for `timesteps` environment steps.
/// `timesteps == 0` returns the seeded initialization.
pub fn train_learner(
    env: &mut dyn Env,
    kind: LearnerKind,
    hp: &Hyperparams,
    timesteps: usize,
    seed: u64,
    log: Option<&mut TrainingLog>,
) -> Result<PolicyParams, RlError> {
    match kind {
        LearnerKind::ClippedPg => clipped_pg::train(env, hp, timesteps, seed, log),
        LearnerKind::AdvantageAc => advantage_ac::train(env, hp, timesteps, seed, log),
        LearnerKind::DeterministicAc => deterministic_ac::train(env, hp, timesteps, seed, log),
    }
}

/// Critic seeds are decorrelated from actor seeds.
pub(crate) fn critic_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logp_gradient() {
        let (u, m, s) = (0.3, -0.2, -0.4);
        let h = 1e-6;
        let (gm, gs) = gaussian_logp_grad(u, m, s);
        let fm = (gaussian_logp(u, m + h, s) - gaussian_logp(u, m - h, s)) / (2.0 * h);
        let fs = (gaussian_logp(u, m, s + h) - gaussian_logp(u, m, s - h)) / (2.0 * h);
        assert!((gm - fm).abs() < 1e-8 && (gs - fs).abs() < 1e-8);
    }
}
