//! Imitation learners built on the SAC core.
//!
//! SQIL and DSAC share one update path: both fill a SAC minibatch half with
//! demonstration transitions and half with the agent's own samples and only
//! differ in the rewards handed to the critic. SQIL uses the constants 1 and
//! 0. DSAC uses the discriminator logit `log D - log(1 - D)` plus a small
//! bonus on demonstrations, and trains the discriminator adversarially with
//! a zero-centered gradient penalty. Behavioral cloning maximizes the
//! log-likelihood of demonstrated actions and never touches the environment.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::diff::{adam_step, lr_at_step, AdamConfig, AdamState, Bound, Tape, Tensor, Var};
use crate::envs::{wrap_for_absorbing_states, Env};
use crate::error::{Error, Result};
use crate::nets::{prob_from_logit, Discriminator, GaussianPolicy, DISC_CLAMP};
use crate::replay::{ReplayBuffer, Source, Trajectory, Transition};
use crate::rng::RunRngs;
use crate::rollout::{collect_episode, Actor};
use crate::sac::{RewardedBatch, SacLearner, SacParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Bc,
    Sqil,
    Dsac,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Bc => "bc",
            Algo::Sqil => "sqil",
            Algo::Dsac => "dsac",
        })
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bc" => Ok(Algo::Bc),
            "sqil" => Ok(Algo::Sqil),
            "dsac" => Ok(Algo::Dsac),
            other => Err(Error::Config(format!(
                "algo: unknown value `{other}` (expected bc, sqil or dsac)"
            ))),
        }
    }
}

/// Bellman-error weights of the demonstration and sample halves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImitationWeights {
    pub lambda_demo: f64,
    pub lambda_samp: f64,
}

impl Default for ImitationWeights {
    fn default() -> Self {
        ImitationWeights {
            lambda_demo: 1.0,
            lambda_samp: 1.0,
        }
    }
}

impl ImitationWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_demo", self.lambda_demo),
            ("lambda_samp", self.lambda_samp),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name}: must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Source of per-transition imitation rewards.
#[derive(Debug, Clone, Copy)]
pub enum RewardProvider<'d> {
    /// 1 on demonstrations, 0 on samples.
    SqilConstant,
    /// Discriminator logit, plus `demo_bonus` on demonstrations.
    Airl {
        disc: &'d Discriminator,
        demo_bonus: f64,
    },
}

fn check_demo_bonus(demo_bonus: f64) -> Result<()> {
    if !demo_bonus.is_finite() || demo_bonus < 0.0 {
        return Err(Error::Config(format!(
            "demo_bonus: must be finite and >= 0, got {demo_bonus}"
        )));
    }
    Ok(())
}

impl RewardProvider<'_> {
    fn validate(&self) -> Result<()> {
        match self {
            RewardProvider::Airl { demo_bonus, .. } => check_demo_bonus(*demo_bonus),
            RewardProvider::SqilConstant => Ok(()),
        }
    }

    /// Rewards before the demonstration bonus.
    pub fn base_rewards(&self, batch: &[&Transition], source: Source) -> Result<Vec<f64>> {
        match self {
            RewardProvider::SqilConstant => {
                let r = if source == Source::Demo { 1.0 } else { 0.0 };
                Ok(vec![r; batch.len()])
            }
            RewardProvider::Airl { disc, .. } => airl_rewards(disc, batch),
        }
    }

    fn bonus(&self) -> f64 {
        match self {
            RewardProvider::SqilConstant => 0.0,
            RewardProvider::Airl { demo_bonus, .. } => *demo_bonus,
        }
    }
}

/// Largest reward magnitude, `log((1 - c) / c)` for the clamp `c`.
pub fn reward_bound() -> f64 {
    (1.0 - DISC_CLAMP).ln() - DISC_CLAMP.ln()
}

/// `log p - log(1 - p)` with `p` clamped to `[DISC_CLAMP, 1 - DISC_CLAMP]`.
/// The clamp is applied in logit space, which is equivalent and keeps
/// `R(p) = -R(1 - p)` exact up to rounding of `1 - p`.
pub fn logit_reward(p: f64) -> f64 {
    let l = reward_bound();
    (p.ln() - (-p).ln_1p()).clamp(-l, l)
}

/// Reward for a raw discriminator logit: the logit clamped to
/// `±reward_bound()`.
pub fn reward_from_logit(logit: f64) -> f64 {
    let l = reward_bound();
    logit.clamp(-l, l)
}

/// `R(s, a) = log D(s, a) - log(1 - D(s, a))`.
pub fn airl_reward(d: &Discriminator, s: &[f64], a: &[f64]) -> Result<f64> {
    let t = Transition {
        obs: s.to_vec(),
        action: a.to_vec(),
        next_obs: s.to_vec(),
        bootstrap_mask: 1.0,
        source: Source::Sample,
    };
    Ok(airl_rewards(d, &[&t])?[0])
}

/// Batched [`airl_reward`].
pub fn airl_rewards(d: &Discriminator, batch: &[&Transition]) -> Result<Vec<f64>> {
    let x = disc_inputs_for(d.input_dim(), batch)?;
    if x.dims2().1 != d.input_dim() {
        return Err(Error::Shape(format!(
            "discriminator input has {} columns, expected {}",
            x.dims2().1,
            d.input_dim()
        )));
    }
    let logits = d.spec.eval(&d.params, &x);
    if !logits.is_finite() {
        return Err(Error::NonFinite {
            op: "discriminator logit".into(),
        });
    }
    Ok(logits
        .data()
        .iter()
        .map(|&l| reward_from_logit(l))
        .collect())
}

/// Rows `[obs, action]` for discriminator input.
pub fn disc_inputs(batch: &[&Transition]) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = batch
        .iter()
        .map(|t| t.obs.iter().chain(&t.action).copied().collect())
        .collect();
    Tensor::from_rows(&rows)
}

/// Like [`disc_inputs`], but when `input_dim` is one less than the row
/// width the last observation component (the absorbing indicator) is left
/// out.
pub fn disc_inputs_for(input_dim: usize, batch: &[&Transition]) -> Result<Tensor> {
    let Some(first) = batch.first() else {
        return disc_inputs(batch);
    };
    if first.obs.len() + first.action.len() != input_dim + 1 || first.obs.is_empty() {
        return disc_inputs(batch);
    }
    let rows: Vec<Vec<f64>> = batch
        .iter()
        .map(|t| {
            let base = &t.obs[..t.obs.len().saturating_sub(1)];
            base.iter().chain(&t.action).copied().collect()
        })
        .collect();
    Tensor::from_rows(&rows)
}

/// Builds the demonstration and sample halves of a critic minibatch: demo
/// rewards `R + bonus` weighted by `lambda_demo`, sample rewards `R`
/// weighted by `lambda_samp`.
pub fn dsac_reward_assignment<'a>(
    rp: &RewardProvider<'_>,
    demo: Vec<&'a Transition>,
    samp: Vec<&'a Transition>,
    weights: ImitationWeights,
) -> Result<(RewardedBatch<'a>, RewardedBatch<'a>)> {
    rp.validate()?;
    weights.validate()?;
    if demo.is_empty() || samp.is_empty() {
        return Err(Error::InvalidArgument(
            "reward assignment needs nonempty batches".into(),
        ));
    }
    let bonus = rp.bonus();
    let demo_r: Vec<f64> = rp
        .base_rewards(&demo, Source::Demo)?
        .into_iter()
        .map(|r| r + bonus)
        .collect();
    let samp_r = rp.base_rewards(&samp, Source::Sample)?;
    Ok((
        RewardedBatch::uniform(demo, demo_r, weights.lambda_demo)?,
        RewardedBatch::uniform(samp, samp_r, weights.lambda_samp)?,
    ))
}

/// Clamped sigmoid of a logit node.
fn clamped_prob<'t>(logit: Var<'t>) -> Var<'t> {
    logit.sigmoid().clamp(DISC_CLAMP, 1.0 - DISC_CLAMP)
}

/// `-mean log D(demo) - mean log(1 - D(samp))`.
pub fn cross_entropy<'t>(
    d: &Discriminator,
    b: &Bound<'t>,
    demo: &Tensor,
    samp: &Tensor,
) -> Result<Var<'t>> {
    check_disc_batch(d, demo)?;
    check_disc_batch(d, samp)?;
    let tape = b.vars()[0].tape();
    let pd = clamped_prob(d.logit_on(b, tape.constant(demo.clone())));
    let ps = clamped_prob(d.logit_on(b, tape.constant(samp.clone())));
    Ok(pd.ln().mean().neg() - ps.neg().add_scalar(1.0).ln().mean())
}

fn check_disc_batch(d: &Discriminator, x: &Tensor) -> Result<()> {
    let (rows, cols) = x.dims2();
    if rows == 0 {
        return Err(Error::InvalidArgument("empty discriminator batch".into()));
    }
    if cols != d.input_dim() {
        return Err(Error::Shape(format!(
            "discriminator input has {cols} columns, expected {}",
            d.input_dim()
        )));
    }
    Ok(())
}

/// Interpolation weights `ε ~ U(0, 1)`, one per pair.
pub fn sample_epsilon(n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// `mean ‖∇_x logit(x̂)‖²` over interpolates
/// `x̂ = ε demo + (1 - ε) samp`. Batches are truncated to the shorter one
/// and `eps` must have that length.
pub fn gradient_penalty<'t>(
    d: &Discriminator,
    b: &Bound<'t>,
    demo: &Tensor,
    samp: &Tensor,
    eps: &[f64],
) -> Result<Var<'t>> {
    check_disc_batch(d, demo)?;
    check_disc_batch(d, samp)?;
    let n = demo.dims2().0.min(samp.dims2().0);
    if eps.len() != n {
        return Err(Error::Shape(format!(
            "{} interpolation weights for {n} pairs",
            eps.len()
        )));
    }
    let cols = d.input_dim();
    let mut rows = Vec::with_capacity(n * cols);
    for (i, &e) in eps.iter().enumerate() {
        let (x, y) = (demo.row_slice(i), samp.row_slice(i));
        rows.extend(x.iter().zip(y).map(|(a, b)| e * a + (1.0 - e) * b));
    }
    let tape = b.vars()[0].tape();
    let x_hat = tape.constant(Tensor::from_raw(vec![n, cols], rows));
    let g = d.spec.input_gradient(b, x_hat);
    Ok(g.square().sum_cols().mean())
}

/// Discriminator objective and its parts.
pub struct DiscLoss<'t> {
    pub total: Var<'t>,
    pub cross_entropy: Var<'t>,
    pub penalty: Var<'t>,
}

/// Cross-entropy plus `gp_coeff` times the gradient penalty.
pub fn discriminator_loss<'t>(
    d: &Discriminator,
    b: &Bound<'t>,
    demo: &Tensor,
    samp: &Tensor,
    eps: &[f64],
    gp_coeff: f64,
) -> Result<DiscLoss<'t>> {
    if !(gp_coeff >= 0.0 && gp_coeff.is_finite()) {
        return Err(Error::Config(format!(
            "gp_coeff: must be finite and >= 0, got {gp_coeff}"
        )));
    }
    let ce = cross_entropy(d, b, demo, samp)?;
    let gp = gradient_penalty(d, b, demo, samp, eps)?;
    Ok(DiscLoss {
        total: ce + gp.scale(gp_coeff),
        cross_entropy: ce,
        penalty: gp,
    })
}

/// Discriminator plus its optimizer.
#[derive(Debug, Clone)]
pub struct DiscriminatorLearner {
    pub disc: Discriminator,
    pub lr: f64,
    pub gp_coeff: f64,
    /// Step decay `(factor, interval)` applied to `lr` by update count.
    pub lr_decay: Option<(f64, u64)>,
    opt: AdamState,
    updates: u64,
}

impl DiscriminatorLearner {
    pub fn new(disc: Discriminator, lr: f64, gp_coeff: f64, adam: AdamConfig) -> Self {
        let opt = AdamState::new(&disc.params, adam);
        DiscriminatorLearner {
            disc,
            lr,
            gp_coeff,
            lr_decay: None,
            opt,
            updates: 0,
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn current_lr(&self) -> f64 {
        match self.lr_decay {
            Some((factor, interval)) => lr_at_step(self.updates, self.lr, factor, interval),
            None => self.lr,
        }
    }

    /// One Adam step; returns the pre-step total loss.
    pub fn update(
        &mut self,
        demo: &[&Transition],
        samp: &[&Transition],
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        let dim = self.disc.input_dim();
        let (xd, xs) = (disc_inputs_for(dim, demo)?, disc_inputs_for(dim, samp)?);
        let eps = sample_epsilon(demo.len().min(samp.len()), rng);
        self.update_on(&xd, &xs, &eps)
    }

    pub fn update_on(&mut self, demo: &Tensor, samp: &Tensor, eps: &[f64]) -> Result<f64> {
        let tape = Tape::new();
        let b = tape.bind(&self.disc.params);
        let loss = discriminator_loss(&self.disc, &b, demo, samp, eps, self.gp_coeff)?;
        let grads = tape.backward(loss.total)?.wrt(&b);
        let value = loss.total.item();
        drop(b);
        let lr = self.current_lr();
        adam_step(&mut self.disc.params, &grads, &mut self.opt, lr)?;
        self.updates += 1;
        Ok(value)
    }
}

/// `-mean log π(a|s)` over demonstration pairs.
pub fn bc_loss<'t>(
    policy: &GaussianPolicy,
    b: &Bound<'t>,
    demo: &[&Transition],
) -> Result<Var<'t>> {
    if demo.is_empty() {
        return Err(Error::InvalidArgument(
            "empty behavioral cloning batch".into(),
        ));
    }
    let tape = b.vars()[0].tape();
    let s = Tensor::from_rows(&demo.iter().map(|t| &t.obs[..]).collect::<Vec<_>>())?;
    let a = Tensor::from_rows(&demo.iter().map(|t| &t.action[..]).collect::<Vec<_>>())?;
    Ok(policy.log_prob_on(b, tape.constant(s), &a)?.mean().neg())
}

/// Behavioral cloning policy plus its optimizer.
#[derive(Debug, Clone)]
pub struct BcLearner {
    pub policy: GaussianPolicy,
    pub lr: f64,
    opt: AdamState,
}

impl BcLearner {
    pub fn new(policy: GaussianPolicy, lr: f64, adam: AdamConfig) -> Self {
        let opt = AdamState::new(&policy.params, adam);
        BcLearner { policy, lr, opt }
    }

    /// One Adam step on a minibatch; returns the pre-step loss.
    pub fn update(&mut self, demo: &[&Transition]) -> Result<f64> {
        let tape = Tape::new();
        let b = tape.bind(&self.policy.params);
        let loss = bc_loss(&self.policy, &b, demo)?;
        let grads = tape.backward(loss)?.wrt(&b);
        let value = loss.item();
        drop(b);
        adam_step(&mut self.policy.params, &grads, &mut self.opt, self.lr)?;
        Ok(value)
    }
}

/// Knobs of the SQIL / DSAC loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ImitationConfig {
    pub algo: Algo,
    pub absorbing_wrapper: bool,
    pub demo_bonus: f64,
    pub weights: ImitationWeights,
    pub gp_coeff: f64,
    /// Minibatch size of each half (demo and sample).
    pub minibatch: usize,
    /// Environment steps collected before any network is updated.
    pub warm_up: u64,
}

impl ImitationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.algo == Algo::Bc {
            return Err(Error::Config(
                "algo: bc does not use the soft-Q imitation loop".into(),
            ));
        }
        self.weights.validate()?;
        if self.minibatch == 0 {
            return Err(Error::Config("minibatch: must be positive".into()));
        }
        check_demo_bonus(self.demo_bonus)?;
        if !(self.gp_coeff >= 0.0 && self.gp_coeff.is_finite()) {
            return Err(Error::Config(format!(
                "gp_coeff: must be finite and >= 0, got {}",
                self.gp_coeff
            )));
        }
        Ok(())
    }
}

/// State of a SQIL or DSAC run.
#[derive(Debug, Clone)]
pub struct ImitationAgent {
    pub sac: SacLearner,
    /// Present for DSAC only.
    pub disc: Option<DiscriminatorLearner>,
    pub config: ImitationConfig,
    pub demos: ReplayBuffer,
    pub samples: ReplayBuffer,
    pub env_steps: u64,
}

/// Summary of one episode plus the updates that followed it. Loss and
/// reward means are over the iteration's updates and `None` when no
/// update ran.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationMetrics {
    pub episode_steps: u64,
    pub env_steps: u64,
    pub episode_return: f64,
    pub updates: usize,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub disc_loss: Option<f64>,
    /// Mean base reward on demonstration minibatches (without the bonus).
    pub demo_reward_mean: Option<f64>,
    /// Mean reward on sample minibatches.
    pub samp_reward_mean: Option<f64>,
    pub alpha: f64,
}

fn mean_opt(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

impl ImitationAgent {
    /// Loads demonstrations into the demo buffer, wrapping them when the
    /// absorbing wrapper is on. Wrapped demos with the wrapper off are
    /// rejected.
    pub fn new(
        sac: SacLearner,
        disc: Option<DiscriminatorLearner>,
        config: ImitationConfig,
        demos: &[Trajectory],
        sample_capacity: usize,
    ) -> Result<Self> {
        config.validate()?;
        if demos.is_empty() {
            return Err(Error::InvalidArgument(
                "no demonstration trajectories".into(),
            ));
        }
        if (config.algo == Algo::Dsac) != disc.is_some() {
            return Err(Error::Config(
                "algo: dsac needs a discriminator and sqil must not have one".into(),
            ));
        }
        if sac.params.augmented_obs != config.absorbing_wrapper {
            return Err(Error::Incompatible(
                "learner observation layout does not match the absorbing_wrapper setting".into(),
            ));
        }
        let mut buf = ReplayBuffer::unbounded();
        for traj in demos {
            let traj = match (config.absorbing_wrapper, traj.augmented) {
                (true, _) => wrap_for_absorbing_states(traj)?,
                (false, false) => traj.clone(),
                (false, true) => {
                    return Err(Error::Incompatible(
                        "wrapped demonstrations cannot be used with absorbing_wrapper = off".into(),
                    ))
                }
            };
            for t in traj.transitions_from(Source::Demo) {
                buf.push(t)?;
            }
        }
        if let Some(first) = buf.iter().next() {
            if first.obs.len() != sac.params.obs_dim() || first.action.len() != sac.params.act_dim()
            {
                return Err(Error::Incompatible(format!(
                    "demonstration dims ({}, {}) do not match the learner ({}, {})",
                    first.obs.len(),
                    first.action.len(),
                    sac.params.obs_dim(),
                    sac.params.act_dim()
                )));
            }
        }
        Ok(ImitationAgent {
            sac,
            disc,
            config,
            demos: buf,
            samples: ReplayBuffer::new(sample_capacity)?,
            env_steps: 0,
        })
    }

    pub fn params(&self) -> &SacParams {
        &self.sac.params
    }

    pub fn in_warm_up(&self) -> bool {
        self.env_steps < self.config.warm_up
    }
}

/// One iteration of the imitation loop: collect an episode (uniform random
/// actions during warm-up, the stochastic policy afterwards), wrap it if
/// the wrapper is on, store it, then run as many discriminator updates as
/// the stored episode has transitions followed by the same number of SAC
/// updates with rewards recomputed per minibatch. No update runs while the
/// total step count is below the warm-up threshold.
///
/// `max_steps` caps the episode length. `on_step` sees the global step
/// count and the current parameters after every environment step.
pub fn dsac_train_iteration(
    agent: &mut ImitationAgent,
    env: &mut dyn Env,
    rngs: &mut RunRngs,
    max_steps: Option<u64>,
    on_step: &mut dyn FnMut(u64, &SacParams) -> Result<()>,
) -> Result<IterationMetrics> {
    let cfg = agent.config.clone();
    let base = agent.env_steps;
    let episode = {
        let params = &agent.sac.params;
        let actor = if agent.in_warm_up() {
            Actor::Uniform
        } else {
            Actor::Stochastic(&params.policy)
        };
        collect_episode(
            env,
            actor,
            cfg.absorbing_wrapper,
            max_steps,
            &mut rngs.env_reset,
            &mut rngs.policy_noise,
            &mut |k| on_step(base + k, params),
        )?
    };
    let traj = episode.trajectory;
    agent.env_steps += traj.len() as u64;
    let stored = if cfg.absorbing_wrapper {
        wrap_for_absorbing_states(&traj)?
    } else {
        traj.clone()
    };
    let transitions = stored.transitions_from(Source::Sample);
    let n_updates = transitions.len();
    for t in transitions {
        agent.samples.push(t)?;
    }

    let mut out = IterationMetrics {
        episode_steps: traj.len() as u64,
        env_steps: agent.env_steps,
        episode_return: traj.env_return,
        alpha: agent.sac.params.alpha(),
        ..Default::default()
    };
    if agent.in_warm_up() {
        return Ok(out);
    }

    let m = cfg.minibatch;
    let mut disc_losses = Vec::new();
    if let Some(disc) = agent.disc.as_mut() {
        for _ in 0..n_updates {
            let demo = agent.demos.sample_minibatch(m, &mut rngs.minibatch)?;
            let samp = agent.samples.sample_minibatch(m, &mut rngs.minibatch)?;
            disc_losses.push(disc.update(&demo, &samp, &mut rngs.gp_epsilon)?);
        }
    }

    let (mut critic, mut actor, mut demo_r, mut samp_r) = (vec![], vec![], vec![], vec![]);
    for _ in 0..n_updates {
        let demo = agent.demos.sample_minibatch(m, &mut rngs.minibatch)?;
        let samp = agent.samples.sample_minibatch(m, &mut rngs.minibatch)?;
        let provider = match &agent.disc {
            Some(d) => RewardProvider::Airl {
                disc: &d.disc,
                demo_bonus: cfg.demo_bonus,
            },
            None => RewardProvider::SqilConstant,
        };
        let (bd, bs) = dsac_reward_assignment(&provider, demo, samp, cfg.weights)?;
        let bonus = provider.bonus();
        demo_r.push(bd.rewards.iter().map(|r| r - bonus).sum::<f64>() / bd.len() as f64);
        samp_r.push(bs.rewards.iter().sum::<f64>() / bs.len() as f64);
        let stats = agent.sac.update(&bd.concat(bs), &mut rngs.policy_noise)?;
        critic.push(stats.critic_loss);
        actor.push(stats.actor_loss);
    }
    out.updates = n_updates;
    out.critic_loss = mean_opt(&critic);
    out.actor_loss = mean_opt(&actor);
    out.disc_loss = mean_opt(&disc_losses);
    out.demo_reward_mean = mean_opt(&demo_r);
    out.samp_reward_mean = mean_opt(&samp_r);
    out.alpha = agent.sac.params.alpha();
    Ok(out)
}

/// Probability `D(x)` for each row, handy for visualisation.
pub fn disc_probabilities(d: &Discriminator, x: &Tensor) -> Result<Vec<f64>> {
    Ok(d.spec
        .eval(&d.params, x)
        .data()
        .iter()
        .map(|&l| prob_from_logit(l))
        .collect())
}
