use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{actor_arch, critic_seed, gaussian_logp, gaussian_logp_grad};
use crate::rl::approximator::{ArchDescriptor, Mlp};
use crate::rl::optim::Adam;
use crate::rl::policy::{init_weights, ActMode, LearnerKind, PolicyParams};
use crate::rl::{Env, EpisodeCounter, Hyperparams, RlError, TrainingLog};

/// Minibatch for the clipped surrogate.
#[derive(Debug, Clone, Copy)]
pub struct ClippedPgBatch<'a> {
    pub obs: &'a [Vec<f64>],
    /// Sampled pre-squash actions.
    pub actions: &'a [f64],
    pub old_logp: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

/// Clipped surrogate plus value loss.
///
/// Returns `(loss, actor_grad, critic_grad)`; the actor gradient carries the
/// log-std derivative as its last element.
#[allow(clippy::too_many_arguments)]
pub fn clipped_pg_loss(
    actor: &Mlp<f64>,
    actor_params: &[f64],
    log_std: f64,
    critic: &Mlp<f64>,
    critic_params: &[f64],
    batch: ClippedPgBatch<'_>,
    clip: f64,
    vf_coef: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>), RlError> {
    let n = batch.obs.len() as f64;
    let mut actor_grad = vec![0.0; actor_params.len() + 1];
    let mut critic_grad = vec![0.0; critic_params.len()];
    let mut loss = 0.0;
    for i in 0..batch.obs.len() {
        let trace = actor.forward_trace(actor_params, &batch.obs[i])?;
        let mean = trace.output()[0];
        let logp = gaussian_logp(batch.actions[i], mean, log_std);
        let ratio = (logp - batch.old_logp[i]).exp();
        let adv = batch.advantages[i];
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
        loss -= unclipped.min(clipped) / n;
        if unclipped <= clipped {
            let dlogp = -ratio * adv / n;
            let (dm, ds) = gaussian_logp_grad(batch.actions[i], mean, log_std);
            let last = actor_grad.len() - 1;
            actor.backward(actor_params, &trace, &[dlogp * dm], &mut actor_grad[..last])?;
            actor_grad[last] += dlogp * ds;
        }

        let vtrace = critic.forward_trace(critic_params, &batch.obs[i])?;
        let err = vtrace.output()[0] - batch.returns[i];
        loss += vf_coef * err * err / n;
        critic.backward(critic_params, &vtrace, &[2.0 * vf_coef * err / n], &mut critic_grad)?;
    }
    Ok((loss, actor_grad, critic_grad))
}

fn value(critic: &Mlp<f64>, params: &[f64], obs: &[f64]) -> Result<f64, RlError> {
    Ok(critic.forward(params, obs)?[0])
}

pub(super) fn train(
    env: &mut dyn Env,
    hp: &Hyperparams,
    timesteps: usize,
    seed: u64,
    mut log: Option<&mut TrainingLog>,
) -> Result<PolicyParams, RlError> {
    let obs_dim = env.obs_dim();
    let arch = actor_arch(obs_dim, hp)?;
    let mut policy = PolicyParams::init(arch, LearnerKind::ClippedPg, seed, hp.init_log_std);
    if timesteps == 0 {
        return Ok(policy);
    }
    let actor = policy.net();
    let critic = Mlp::new(ArchDescriptor::new(obs_dim, &hp.hidden, 1)?);
    let mut crng = ChaCha8Rng::seed_from_u64(critic_seed(seed));
    let mut critic_params = init_weights(critic.arch(), &mut crng, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut actor_opt = Adam::new(policy.weights.len() + 1, hp.learning_rate, Some(hp.max_grad_norm));
    let mut critic_opt = Adam::new(critic_params.len(), hp.learning_rate, Some(hp.max_grad_norm));
    let squash = env.squash();
    let mut episodes = EpisodeCounter::default();

    let mut obs = env.reset()?;
    let mut steps = 0;
    while steps < timesteps {
        let len = hp.rollout_len.max(1).min(timesteps - steps);
        let mut buf_obs = Vec::with_capacity(len);
        let mut buf_u = Vec::with_capacity(len);
        let mut buf_logp = Vec::with_capacity(len);
        let mut buf_val = Vec::with_capacity(len);
        let mut buf_rew = Vec::with_capacity(len);
        let mut buf_done = Vec::with_capacity(len);
        for _ in 0..len {
            let act = policy.act(&obs, squash, ActMode::Train(&mut rng), 0.0)?;
            let mean = actor.forward(&policy.weights, &obs)?[0];
            let v = value(&critic, &critic_params, &obs)?;
            let step = env.step(act.action, &act.hidden)?;
            steps += 1;
            episodes.record(steps, step.reward, step.done, env.sharpe(), &mut log);
            buf_logp.push(gaussian_logp(act.pre_squash, mean, policy.log_std));
            buf_u.push(act.pre_squash);
            buf_val.push(v);
            buf_rew.push(step.reward);
            buf_done.push(step.done);
            buf_obs.push(std::mem::take(&mut obs));
            obs = if step.done { env.reset()? } else { step.obs };
        }
        let last_done = *buf_done.last().expect("non-empty rollout");
        let mut next_value = if last_done {
            0.0
        } else {
            value(&critic, &critic_params, &obs)?
        };
        let mut advantages = vec![0.0; len];
        let mut gae = 0.0;
        for t in (0..len).rev() {
            let non_terminal = if buf_done[t] { 0.0 } else { 1.0 };
            let delta = buf_rew[t] + hp.gamma * next_value * non_terminal - buf_val[t];
            gae = delta + hp.gamma * hp.gae_lambda * non_terminal * gae;
            advantages[t] = gae;
            next_value = buf_val[t];
        }
        let returns: Vec<f64> = advantages.iter().zip(&buf_val).map(|(a, v)| a + v).collect();
        if len > 1 {
            let m = advantages.iter().sum::<f64>() / len as f64;
            let sd = (advantages.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / len as f64).sqrt();
            for a in &mut advantages {
                *a = (*a - m) / (sd + 1e-8);
            }
        }

        let mut idx: Vec<usize> = (0..len).collect();
        for _ in 0..hp.epochs {
            idx.shuffle(&mut rng);
            for chunk in idx.chunks(hp.batch.max(1)) {
                let obs_b: Vec<Vec<f64>> = chunk.iter().map(|&i| buf_obs[i].clone()).collect();
                let u_b: Vec<f64> = chunk.iter().map(|&i| buf_u[i]).collect();
                let lp_b: Vec<f64> = chunk.iter().map(|&i| buf_logp[i]).collect();
                let adv_b: Vec<f64> = chunk.iter().map(|&i| advantages[i]).collect();
                let ret_b: Vec<f64> = chunk.iter().map(|&i| returns[i]).collect();
                let batch = ClippedPgBatch {
                    obs: &obs_b,
                    actions: &u_b,
                    old_logp: &lp_b,
                    advantages: &adv_b,
                    returns: &ret_b,
                };
                let (_, ga, gc) = clipped_pg_loss(
                    &actor,
                    &policy.weights,
                    policy.log_std,
                    &critic,
                    &critic_params,
                    batch,
                    hp.clip,
                    hp.vf_coef,
                )?;
                let mut joined = std::mem::take(&mut policy.weights);
                joined.push(policy.log_std);
                actor_opt.step(&mut joined, &ga);
                policy.log_std = joined.pop().expect("log_std").clamp(-5.0, 1.0);
                policy.weights = joined;
                critic_opt.step(&mut critic_params, &gc);
            }
        }
    }
    Ok(policy)
}
