use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{actor_arch, critic_seed, gaussian_logp_grad};
use crate::rl::approximator::{ArchDescriptor, Mlp};
use crate::rl::optim::Adam;
use crate::rl::policy::{init_weights, ActMode, LearnerKind, PolicyParams};
use crate::rl::{Env, EpisodeCounter, Hyperparams, RlError, TrainingLog};

/// An n-step segment with bootstrapped returns.
#[derive(Debug, Clone, Copy)]
pub struct AdvantageAcBatch<'a> {
    pub obs: &'a [Vec<f64>],
    pub actions: &'a [f64],
    pub returns: &'a [f64],
}

/// `mean(-logp·A + vf_coef·(V - R)²)` with `A = R - V` held constant in
/// the policy term. Returns `(loss, actor_grad incl. log-std, critic_grad)`.
#[allow(clippy::too_many_arguments)]
pub fn advantage_ac_loss(
    actor: &Mlp<f64>,
    actor_params: &[f64],
    log_std: f64,
    critic: &Mlp<f64>,
    critic_params: &[f64],
    batch: AdvantageAcBatch<'_>,
    vf_coef: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>), RlError> {
    let n = batch.obs.len() as f64;
    let mut actor_grad = vec![0.0; actor_params.len() + 1];
    let mut critic_grad = vec![0.0; critic_params.len()];
    let last = actor_params.len();
    let mut loss = 0.0;
    for i in 0..batch.obs.len() {
        let vtrace = critic.forward_trace(critic_params, &batch.obs[i])?;
        let v = vtrace.output()[0];
        let adv = batch.returns[i] - v;

        let trace = actor.forward_trace(actor_params, &batch.obs[i])?;
        let mean = trace.output()[0];
        let logp = super::gaussian_logp(batch.actions[i], mean, log_std);
        loss += (-logp * adv + vf_coef * adv * adv) / n;
        let (dm, ds) = gaussian_logp_grad(batch.actions[i], mean, log_std);
        actor.backward(actor_params, &trace, &[-adv * dm / n], &mut actor_grad[..last])?;
        actor_grad[last] += -adv * ds / n;
        critic.backward(critic_params, &vtrace, &[-2.0 * vf_coef * adv / n], &mut critic_grad)?;
    }
    Ok((loss, actor_grad, critic_grad))
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
    let mut policy = PolicyParams::init(arch, LearnerKind::AdvantageAc, seed, hp.init_log_std);
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
        let len = hp.n_steps.max(1).min(timesteps - steps);
        let mut seg_obs = Vec::with_capacity(len);
        let mut seg_u = Vec::with_capacity(len);
        let mut seg_rew = Vec::with_capacity(len);
        let mut done = false;
        for _ in 0..len {
            let act = policy.act(&obs, squash, ActMode::Train(&mut rng), 0.0)?;
            let step = env.step(act.action, &act.hidden)?;
            steps += 1;
            episodes.record(steps, step.reward, step.done, env.sharpe(), &mut log);
            seg_u.push(act.pre_squash);
            seg_rew.push(step.reward);
            seg_obs.push(std::mem::take(&mut obs));
            done = step.done;
            obs = if done { env.reset()? } else { step.obs };
            if done {
                break;
            }
        }
        let mut ret = if done {
            0.0
        } else {
            critic.forward(&critic_params, &obs)?[0]
        };
        let mut returns = vec![0.0; seg_rew.len()];
        for t in (0..seg_rew.len()).rev() {
            ret = seg_rew[t] + hp.gamma * ret;
            returns[t] = ret;
        }
        let batch = AdvantageAcBatch {
            obs: &seg_obs,
            actions: &seg_u,
            returns: &returns,
        };
        let (_, ga, gc) = advantage_ac_loss(
            &actor,
            &policy.weights,
            policy.log_std,
            &critic,
            &critic_params,
            batch,
            hp.vf_coef,
        )?;
        let mut joined = std::mem::take(&mut policy.weights);
        joined.push(policy.log_std);
        actor_opt.step(&mut joined, &ga);
        policy.log_std = joined.pop().expect("log_std").clamp(-5.0, 1.0);
        policy.weights = joined;
        critic_opt.step(&mut critic_params, &gc);
    }
    Ok(policy)
}
