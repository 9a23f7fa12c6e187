//! Episode collection and deterministic evaluation.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::{augment, Env};
use crate::error::Result;
use crate::nets::{policy_mean_action, policy_sample, GaussianPolicy};
use crate::replay::Trajectory;

/// Where actions come from during a rollout.
#[derive(Clone, Copy)]
pub enum Actor<'a> {
    /// Uniform on `[-1, 1]^dim(A)`.
    Uniform,
    /// Reparameterized sample of the policy.
    Stochastic(&'a GaussianPolicy),
    /// `tanh(mu(s))`.
    Deterministic(&'a GaussianPolicy),
}

/// One unwrapped episode with its per-step task rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub trajectory: Trajectory,
    pub rewards: Vec<f64>,
}

/// Rolls out one episode. Policy inputs get a zero absorbing indicator
/// appended when `augment_obs` is set; the returned trajectory is always in
/// the environment's own observation space. `max_steps` cuts the episode
/// short, marking it truncated. `on_step` runs after every environment step
/// with the 1-based step index within the episode.
pub fn collect_episode(
    env: &mut dyn Env,
    actor: Actor<'_>,
    augment_obs: bool,
    max_steps: Option<u64>,
    reset_rng: &mut dyn RngCore,
    noise_rng: &mut dyn RngCore,
    on_step: &mut dyn FnMut(u64) -> Result<()>,
) -> Result<Episode> {
    let act_dim = env.spec().act_dim;
    let mut obs = vec![env.reset(reset_rng)];
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let (mut terminal, mut truncated) = (false, false);
    while !(terminal || truncated) {
        let s = obs.last().expect("non-empty");
        let input = if augment_obs {
            augment(s, false)
        } else {
            s.clone()
        };
        let action = match actor {
            Actor::Uniform => (0..act_dim)
                .map(|_| noise_rng.random_range(-1.0..1.0))
                .collect(),
            Actor::Stochastic(p) => {
                let noise: Vec<f64> = (0..act_dim)
                    .map(|_| {
                        rand_distr::Distribution::sample(
                            &rand_distr::StandardNormal,
                            &mut *noise_rng,
                        )
                    })
                    .collect();
                policy_sample(p, &input, &noise)?.0
            }
            Actor::Deterministic(p) => policy_mean_action(p, &input)?,
        };
        let r = env.step(&action)?;
        obs.push(r.next_obs);
        actions.push(action);
        rewards.push(r.env_reward);
        terminal = r.terminal;
        truncated = r.truncated && !r.terminal;
        on_step(actions.len() as u64)?;
        if !(terminal || truncated) && max_steps.is_some_and(|m| actions.len() as u64 >= m) {
            truncated = true;
        }
    }
    let env_return = rewards.iter().sum();
    Ok(Episode {
        trajectory: Trajectory {
            obs,
            actions,
            terminal,
            truncated,
            env_return,
            augmented: false,
        },
        rewards,
    })
}

/// Returns of `episodes` deterministic rollouts.
pub fn evaluate_policy(
    env: &mut dyn Env,
    policy: &GaussianPolicy,
    episodes: usize,
    augment_obs: bool,
    reset_rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    (0..episodes)
        .map(|_| {
            collect_episode(
                env,
                Actor::Deterministic(policy),
                augment_obs,
                None,
                reset_rng,
                &mut unused,
                &mut |_| Ok(()),
            )
            .map(|e| e.trajectory.env_return)
        })
        .collect()
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
