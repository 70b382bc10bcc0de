use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{actor_arch, critic_seed};
use crate::rl::approximator::{ArchDescriptor, Mlp};
use crate::rl::optim::Adam;
use crate::rl::policy::{init_weights, ActMode, LearnerKind, PolicyParams, Squash};
use crate::rl::{Env, EpisodeCounter, Hyperparams, RlError, TrainingLog, Transition};

/// Replay minibatch with precomputed TD targets.
#[derive(Debug, Clone, Copy)]
pub struct CriticBatch<'a> {
    pub obs: &'a [Vec<f64>],
    pub actions: &'a [f64],
    pub targets: &'a [f64],
}

fn critic_input(obs: &[f64], action: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(obs.len() + 1);
    x.extend_from_slice(obs);
    x.push(action);
    x
}

/// `mean((Q(s,a) - y)²)` and its parameter gradient.
pub fn deterministic_critic_loss(
    critic: &Mlp<f64>,
    params: &[f64],
    batch: CriticBatch<'_>,
) -> Result<(f64, Vec<f64>), RlError> {
    let n = batch.obs.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for i in 0..batch.obs.len() {
        let trace = critic.forward_trace(params, &critic_input(&batch.obs[i], batch.actions[i]))?;
        let err = trace.output()[0] - batch.targets[i];
        loss += err * err / n;
        critic.backward(params, &trace, &[2.0 * err / n], &mut grad)?;
    }
    Ok((loss, grad))
}

/// `-mean Q(s, squash(μ(s)))` and its gradient in the actor parameters.
pub fn deterministic_actor_loss(
    actor: &Mlp<f64>,
    actor_params: &[f64],
    critic: &Mlp<f64>,
    critic_params: &[f64],
    obs: &[Vec<f64>],
    squash: Squash,
) -> Result<(f64, Vec<f64>), RlError> {
    let n = obs.len() as f64;
    let mut grad = vec![0.0; actor_params.len()];
    let mut scratch = vec![0.0; critic_params.len()];
    let mut loss = 0.0;
    for s in obs {
        let trace = actor.forward_trace(actor_params, s)?;
        let u = trace.output()[0];
        let a = squash.apply(u);
        let ctrace = critic.forward_trace(critic_params, &critic_input(s, a))?;
        loss -= ctrace.output()[0] / n;
        let dq_dx = critic.backward(critic_params, &ctrace, &[-1.0 / n], &mut scratch)?;
        let dq_da = dq_dx[dq_dx.len() - 1];
        actor.backward(actor_params, &trace, &[dq_da * squash.derivative(u)], &mut grad)?;
    }
    Ok((loss, grad))
}

fn soft_update(target: &mut [f64], online: &[f64], tau: f64) {
    for (t, o) in target.iter_mut().zip(online) {
        *t += tau * (o - *t);
    }
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
    let mut policy = PolicyParams::init(arch, LearnerKind::DeterministicAc, seed, hp.init_log_std);
    if timesteps == 0 {
        return Ok(policy);
    }
    let actor = policy.net();
    let critic = Mlp::new(ArchDescriptor::new(obs_dim + 1, &hp.hidden, 1)?);
    let mut crng = ChaCha8Rng::seed_from_u64(critic_seed(seed));
    let mut critic_params = init_weights(critic.arch(), &mut crng, 1.0);
    let mut target_actor = policy.weights.clone();
    let mut target_critic = critic_params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut actor_opt = Adam::new(policy.weights.len(), hp.learning_rate, Some(hp.max_grad_norm));
    let mut critic_opt = Adam::new(critic_params.len(), hp.learning_rate, Some(hp.max_grad_norm));
    let squash = env.squash();
    let mut replay: VecDeque<Transition> = VecDeque::with_capacity(hp.replay.min(timesteps));
    let mut episodes = EpisodeCounter::default();

    let mut obs = env.reset()?;
    for step_no in 1..=timesteps {
        let act = policy.act(&obs, squash, ActMode::Train(&mut rng), hp.exploration_sigma)?;
        let step = env.step(act.action, &act.hidden)?;
        episodes.record(step_no, step.reward, step.done, env.sharpe(), &mut log);
        if replay.len() == hp.replay.max(1) {
            replay.pop_front();
        }
        replay.push_back(Transition {
            observation: std::mem::take(&mut obs),
            action: act.action,
            reward: step.reward,
            next_observation: step.obs.clone(),
            terminal: step.done,
        });
        obs = if step.done { env.reset()? } else { step.obs };

        if step_no < hp.learning_starts.max(1) || replay.is_empty() {
            continue;
        }
        let b = hp.batch.max(1).min(replay.len());
        let picks: Vec<&Transition> = (0..b).map(|_| &replay[rng.random_range(0..replay.len())]).collect();
        let mut targets = Vec::with_capacity(b);
        for t in &picks {
            let y = if t.terminal {
                t.reward
            } else {
                let u = actor.forward(&target_actor, &t.next_observation)?[0];
                let q = critic.forward(&target_critic, &critic_input(&t.next_observation, squash.apply(u)))?[0];
                t.reward + hp.gamma * q
            };
            targets.push(y);
        }
        let obs_b: Vec<Vec<f64>> = picks.iter().map(|t| t.observation.clone()).collect();
        let act_b: Vec<f64> = picks.iter().map(|t| t.action).collect();
        let batch = CriticBatch {
            obs: &obs_b,
            actions: &act_b,
            targets: &targets,
        };
        let (_, gc) = deterministic_critic_loss(&critic, &critic_params, batch)?;
        critic_opt.step(&mut critic_params, &gc);
        let (_, ga) = deterministic_actor_loss(&actor, &policy.weights, &critic, &critic_params, &obs_b, squash)?;
        actor_opt.step(&mut policy.weights, &ga);
        soft_update(&mut target_critic, &critic_params, hp.tau);
        soft_update(&mut target_actor, &policy.weights, hp.tau);
    }
    Ok(policy)
}
