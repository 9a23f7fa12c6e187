//! Soft actor-critic with twin critics, automatic temperature tuning and
//! Polyak-averaged targets.
//!
//! The learner never looks at environment rewards itself: every update takes
//! a [`RewardedBatch`] whose rewards and per-transition loss weights were
//! assigned by the caller. Plain RL, SQIL and DSAC differ only in that
//! assignment.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diff::{
    adam_step, clip_global_norm, lr_at_step, AdamConfig, AdamState, Bound, ParamSet, Tape, Tensor,
    Var,
};
use crate::envs::is_absorbing;
use crate::error::{Error, Result};
use crate::nets::{GaussianPolicy, TwinQ};
use crate::replay::Transition;

/// Policy, critics, targets and temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct SacParams {
    pub policy: GaussianPolicy,
    pub critics: TwinQ,
    pub target_critics: TwinQ,
    pub log_alpha: f64,
    pub entropy_target: f64,
    /// Observations carry the absorbing indicator as their last component.
    pub augmented_obs: bool,
}

impl SacParams {
    pub fn new<R: rand::Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        policy_hidden: &[usize],
        critic_hidden: &[usize],
        init_alpha: f64,
        augmented_obs: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if !(init_alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "initial alpha {init_alpha}"
            )));
        }
        let policy = GaussianPolicy::new(obs_dim, act_dim, policy_hidden, rng)?;
        let critics = TwinQ::new(obs_dim, act_dim, critic_hidden, rng)?;
        Ok(SacParams {
            policy,
            target_critics: critics.clone(),
            critics,
            log_alpha: init_alpha.ln(),
            entropy_target: default_entropy_target(act_dim),
            augmented_obs,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.obs_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.policy.act_dim()
    }

    /// Places the trainable groups on `tape` as differentiable leaves.
    pub fn bind<'t>(&self, tape: &'t Tape) -> SacBound<'t> {
        SacBound {
            policy: tape.bind(&self.policy.params),
            q1: tape.bind(&self.critics.q1),
            q2: tape.bind(&self.critics.q2),
            log_alpha: tape.leaf(Tensor::scalar(self.log_alpha)),
        }
    }

    /// Flattens everything into one named set for checkpoints.
    pub fn to_param_set(&self) -> ParamSet {
        let mut out = self.policy.params.prefixed("policy/");
        let groups = [
            ("q1/", &self.critics.q1),
            ("q2/", &self.critics.q2),
            ("target_q1/", &self.target_critics.q1),
            ("target_q2/", &self.target_critics.q2),
        ];
        for (prefix, set) in groups {
            out.extend(set.prefixed(prefix)).expect("distinct prefixes");
        }
        out.insert("log_alpha", Tensor::scalar(self.log_alpha))
            .expect("distinct name");
        out
    }

    /// Restores values from [`SacParams::to_param_set`] output into an
    /// already-shaped learner.
    pub fn load_param_set(&mut self, set: &ParamSet) -> Result<()> {
        let take = |prefix: &str, into: &mut ParamSet| -> Result<()> {
            let part = set.strip_prefix(prefix);
            into.check_same_layout(&part)?;
            *into = part;
            Ok(())
        };
        take("policy/", &mut self.policy.params)?;
        take("q1/", &mut self.critics.q1)?;
        take("q2/", &mut self.critics.q2)?;
        take("target_q1/", &mut self.target_critics.q1)?;
        take("target_q2/", &mut self.target_critics.q2)?;
        self.log_alpha = set
            .get("log_alpha")
            .filter(|t| t.is_scalar())
            .ok_or_else(|| Error::Incompatible("checkpoint lacks log_alpha".into()))?
            .item();
        Ok(())
    }
}

/// `-dim(A)`.
pub fn default_entropy_target(act_dim: usize) -> f64 {
    -(act_dim as f64)
}

/// Trainable parameter groups of [`SacParams`] on a tape.
pub struct SacBound<'t> {
    pub policy: Bound<'t>,
    pub q1: Bound<'t>,
    pub q2: Bound<'t>,
    pub log_alpha: Var<'t>,
}

/// Minibatch with the rewards and loss weights assigned for this update.
#[derive(Debug, Clone)]
pub struct RewardedBatch<'a> {
    pub transitions: Vec<&'a Transition>,
    pub rewards: Vec<f64>,
    pub weights: Vec<f64>,
}

impl<'a> RewardedBatch<'a> {
    pub fn new(
        transitions: Vec<&'a Transition>,
        rewards: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if transitions.len() != rewards.len() || transitions.len() != weights.len() {
            return Err(Error::Shape(format!(
                "rewarded batch: {} transitions, {} rewards, {} weights",
                transitions.len(),
                rewards.len(),
                weights.len()
            )));
        }
        if transitions.is_empty() {
            return Err(Error::InvalidArgument("empty rewarded batch".into()));
        }
        if rewards.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                op: "reward assignment".into(),
            });
        }
        Ok(RewardedBatch {
            transitions,
            rewards,
            weights,
        })
    }

    /// Uniform weight `weight` for every transition.
    pub fn uniform(
        transitions: Vec<&'a Transition>,
        rewards: Vec<f64>,
        weight: f64,
    ) -> Result<Self> {
        let n = transitions.len();
        Self::new(transitions, rewards, vec![weight; n])
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Concatenation `self ++ other`.
    pub fn concat(mut self, other: RewardedBatch<'a>) -> Self {
        self.transitions.extend(other.transitions);
        self.rewards.extend(other.rewards);
        self.weights.extend(other.weights);
        self
    }

    pub fn obs(&self) -> Result<Tensor> {
        Tensor::from_rows(
            &self
                .transitions
                .iter()
                .map(|t| &t.obs[..])
                .collect::<Vec<_>>(),
        )
    }

    pub fn actions(&self) -> Result<Tensor> {
        Tensor::from_rows(
            &self
                .transitions
                .iter()
                .map(|t| &t.action[..])
                .collect::<Vec<_>>(),
        )
    }

    pub fn next_obs(&self) -> Result<Tensor> {
        Tensor::from_rows(
            &self
                .transitions
                .iter()
                .map(|t| &t.next_obs[..])
                .collect::<Vec<_>>(),
        )
    }
}

/// `[rows, cols]` standard-normal draws.
pub fn normal_noise(rows: usize, cols: usize, rng: &mut dyn RngCore) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut *rng))
        .collect();
    Tensor::from_raw(vec![rows, cols], data)
}

/// Soft state values `min(Q1', Q2')(s, a) - α log π(a|s)` with `a` drawn by
/// the reparameterized policy from `noise`, using the target critics.
///
/// For absorbing states (when observations are augmented) the value is the
/// target estimate at the zero action with no entropy term, so the
/// absorbing self-loop has the fixed point `Q(s_a, 0) = r / (1 - γ)`.
pub fn soft_values(p: &SacParams, states: &Tensor, noise: &Tensor) -> Result<Vec<f64>> {
    let (rows, _) = states.dims2();
    let (mut actions, mut log_probs) = p.policy.sample_batch(states, noise)?;
    let absorbing: Vec<bool> = (0..rows)
        .map(|r| p.augmented_obs && is_absorbing(states.row_slice(r)))
        .collect();
    if absorbing.iter().any(|&a| a) {
        let act_dim = p.act_dim();
        let data = actions.data_mut();
        for (r, _) in absorbing.iter().enumerate().filter(|(_, &a)| a) {
            data[r * act_dim..(r + 1) * act_dim].fill(0.0);
            log_probs[r] = 0.0;
        }
    }
    let (q1, q2) = p.target_critics.eval_batch(states, &actions)?;
    let alpha = p.alpha();
    Ok(q1
        .iter()
        .zip(&q2)
        .zip(&log_probs)
        .map(|((a, b), lp)| a.min(*b) - alpha * lp)
        .collect())
}

/// Single-state form of [`soft_values`].
pub fn soft_value(p: &SacParams, s: &[f64], noise: &[f64]) -> Result<f64> {
    if s.len() != p.obs_dim() || noise.len() != p.act_dim() {
        return Err(Error::Shape("soft_value: state or noise dimension".into()));
    }
    Ok(soft_values(p, &Tensor::row(s), &Tensor::row(noise))?[0])
}

/// Regression targets `y = r + mask · γ · V(s')`.
pub fn bellman_targets(
    p: &SacParams,
    batch: &RewardedBatch<'_>,
    gamma: f64,
    next_noise: &Tensor,
) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "gamma {gamma} outside [0, 1)"
        )));
    }
    let values = soft_values(p, &batch.next_obs()?, next_noise)?;
    let targets: Vec<f64> = batch
        .transitions
        .iter()
        .zip(&batch.rewards)
        .zip(&values)
        .map(|((t, r), v)| r + t.bootstrap_mask * gamma * v)
        .collect();
    if targets.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite {
            op: "bellman target".into(),
        });
    }
    Ok(targets)
}

/// `mean(w · (Q1 - y)^2) + mean(w · (Q2 - y)^2)` with `y` held constant.
pub fn critic_loss_with_targets<'t>(
    p: &SacParams,
    b: &SacBound<'t>,
    batch: &RewardedBatch<'_>,
    targets: &[f64],
) -> Result<Var<'t>> {
    let tape = b.log_alpha.tape();
    let n = batch.len();
    if targets.len() != n {
        return Err(Error::Shape(format!(
            "{} targets for {n} transitions",
            targets.len()
        )));
    }
    let s = tape.constant(batch.obs()?);
    let a = tape.constant(batch.actions()?);
    let y = tape.constant(Tensor::from_raw(vec![n, 1], targets.to_vec()));
    let w = tape.constant(Tensor::from_raw(vec![n, 1], batch.weights.clone()));
    let net = &p.critics.net;
    let e1 = net.forward(&b.q1, s, a) - y;
    let e2 = net.forward(&b.q2, s, a) - y;
    Ok((w * e1.square()).mean() + (w * e2.square()).mean())
}

/// Squared soft Bellman error of both critics on `batch`.
pub fn critic_loss<'t>(
    p: &SacParams,
    b: &SacBound<'t>,
    batch: &RewardedBatch<'_>,
    gamma: f64,
    next_noise: &Tensor,
) -> Result<Var<'t>> {
    let targets = bellman_targets(p, batch, gamma, next_noise)?;
    critic_loss_with_targets(p, b, batch, &targets)
}

/// Actor objective `mean(α log π(a|s) - min(Q1, Q2)(s, a))` with `a`
/// reparameterized. Critics and α enter as constants. Also returns the
/// per-state log-probabilities for the temperature loss.
pub fn actor_loss<'t>(
    p: &SacParams,
    b: &SacBound<'t>,
    states: &Tensor,
    noise: &Tensor,
) -> (Var<'t>, Vec<f64>) {
    let tape = b.log_alpha.tape();
    let s = tape.constant(states.clone());
    let sample = p.policy.sample_on(&b.policy, s, noise);
    let q1c = tape.bind_const(&p.critics.q1);
    let q2c = tape.bind_const(&p.critics.q2);
    let net = &p.critics.net;
    let q = net
        .forward(&q1c, s, sample.action)
        .minimum(net.forward(&q2c, s, sample.action));
    let loss = (sample.log_prob.scale(p.alpha()) - q).mean();
    (loss, sample.log_prob.value().into_data())
}

/// Temperature objective `mean(-α (log π + H̃))`, differentiable in
/// `log α` only.
pub fn temperature_loss<'t>(log_alpha: Var<'t>, log_probs: &[f64], entropy_target: f64) -> Var<'t> {
    let tape = log_alpha.tape();
    let shifted: Vec<f64> = log_probs.iter().map(|lp| lp + entropy_target).collect();
    let c = tape.constant(Tensor::from_raw(vec![shifted.len(), 1], shifted));
    c.mul_scalar(log_alpha.exp()).neg().mean()
}

/// `target ← (1 - τ) target + τ live`, elementwise over both critics.
pub fn polyak_update(targets: &mut TwinQ, live: &TwinQ, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside [0, 1]")));
    }
    targets
        .q1
        .update(&live.q1, |t, l| *t = (1.0 - tau) * *t + tau * l)?;
    targets
        .q2
        .update(&live.q2, |t, l| *t = (1.0 - tau) * *t + tau * l)
}

/// Optimizer and schedule settings for [`SacLearner`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    pub lr_decay: f64,
    pub lr_decay_interval: u64,
    /// Apply the step decay to critic and temperature rates as well.
    pub decay_all: bool,
    pub actor_clip: Option<f64>,
    pub critic_clip: Option<f64>,
    pub adam: AdamConfig,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            gamma: 0.99,
            tau: 5e-3,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            alpha_lr: 1e-3,
            lr_decay: 0.5,
            lr_decay_interval: 100_000,
            decay_all: false,
            actor_clip: Some(40.0),
            critic_clip: None,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SacStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub temperature_loss: f64,
    pub alpha: f64,
}

/// Owns parameters plus optimizer state and runs combined updates.
#[derive(Debug, Clone)]
pub struct SacLearner {
    pub params: SacParams,
    pub config: SacConfig,
    actor_opt: AdamState,
    q1_opt: AdamState,
    q2_opt: AdamState,
    alpha_opt: AdamState,
    updates: u64,
}

fn log_alpha_set(v: f64) -> ParamSet {
    let mut s = ParamSet::new();
    s.insert("log_alpha", Tensor::scalar(v)).expect("fresh set");
    s
}

impl SacLearner {
    pub fn new(params: SacParams, config: SacConfig) -> Self {
        let adam = config.adam;
        SacLearner {
            actor_opt: AdamState::new(&params.policy.params, adam),
            q1_opt: AdamState::new(&params.critics.q1, adam),
            q2_opt: AdamState::new(&params.critics.q2, adam),
            alpha_opt: AdamState::new(&log_alpha_set(params.log_alpha), adam),
            params,
            config,
            updates: 0,
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn lr(&self, base: f64, decays: bool) -> f64 {
        if decays {
            lr_at_step(
                self.updates,
                base,
                self.config.lr_decay,
                self.config.lr_decay_interval,
            )
        } else {
            base
        }
    }

    /// Critic gradients `(∂L/∂Q1, ∂L/∂Q2)` for a batch, without updating.
    pub fn critic_gradients(
        &self,
        batch: &RewardedBatch<'_>,
        next_noise: &Tensor,
    ) -> Result<(ParamSet, ParamSet)> {
        let tape = Tape::new();
        let b = self.params.bind(&tape);
        let loss = critic_loss(&self.params, &b, batch, self.config.gamma, next_noise)?;
        let g = tape.backward(loss)?;
        Ok((g.wrt(&b.q1), g.wrt(&b.q2)))
    }

    /// One critic, actor and temperature step on `batch`, then the target
    /// update. All three losses are evaluated at the pre-update parameters.
    pub fn update(&mut self, batch: &RewardedBatch<'_>, rng: &mut dyn RngCore) -> Result<SacStats> {
        let n = batch.len();
        let act_dim = self.params.act_dim();
        let next_noise = normal_noise(n, act_dim, rng);
        let noise = normal_noise(n, act_dim, rng);
        self.update_with_noise(batch, &next_noise, &noise)
    }

    pub fn update_with_noise(
        &mut self,
        batch: &RewardedBatch<'_>,
        next_noise: &Tensor,
        noise: &Tensor,
    ) -> Result<SacStats> {
        let p = &self.params;
        let tape = Tape::new();
        let b = p.bind(&tape);

        let targets = bellman_targets(p, batch, self.config.gamma, next_noise)?;
        let critic = critic_loss_with_targets(p, &b, batch, &targets)?;
        let states = batch.obs()?;
        let (actor, log_probs) = actor_loss(p, &b, &states, noise);
        let temperature = temperature_loss(b.log_alpha, &log_probs, p.entropy_target);
        // The three losses touch disjoint parameter groups.
        let total = critic + actor + temperature;
        let grads = tape.backward(total)?;

        let mut g_policy = grads.wrt(&b.policy);
        let mut g_q1 = grads.wrt(&b.q1);
        let mut g_q2 = grads.wrt(&b.q2);
        let g_alpha = log_alpha_set(grads.get_or_zero(b.log_alpha).item());
        if let Some(c) = self.config.actor_clip {
            clip_global_norm(&mut g_policy, c)?;
        }
        if let Some(c) = self.config.critic_clip {
            clip_global_norm(&mut g_q1, c)?;
            clip_global_norm(&mut g_q2, c)?;
        }
        let stats = SacStats {
            critic_loss: critic.item(),
            actor_loss: actor.item(),
            temperature_loss: temperature.item(),
            alpha: p.alpha(),
        };
        drop(b);

        let decay_all = self.config.decay_all;
        let actor_lr = self.lr(self.config.actor_lr, true);
        let critic_lr = self.lr(self.config.critic_lr, decay_all);
        let alpha_lr = self.lr(self.config.alpha_lr, decay_all);
        let p = &mut self.params;
        adam_step(
            &mut p.policy.params,
            &g_policy,
            &mut self.actor_opt,
            actor_lr,
        )?;
        adam_step(&mut p.critics.q1, &g_q1, &mut self.q1_opt, critic_lr)?;
        adam_step(&mut p.critics.q2, &g_q2, &mut self.q2_opt, critic_lr)?;
        let mut la = log_alpha_set(p.log_alpha);
        adam_step(&mut la, &g_alpha, &mut self.alpha_opt, alpha_lr)?;
        p.log_alpha = la.flatten()[0];
        polyak_update(&mut p.target_critics, &p.critics, self.config.tau)?;
        self.updates += 1;
        Ok(stats)
    }
}
