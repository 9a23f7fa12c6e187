//! WebAssembly bindings for the static demo page in `www/`.
//!
//! The plain Rust functions carry the logic and are tested natively; the
//! `#[wasm_bindgen]` items only adapt types for JavaScript.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use dsac_core::diff::{AdamConfig, Tensor};
use dsac_core::envs::{is_absorbing, wrap_for_absorbing_states, Env, PointGoal, PointGoalParams};
use dsac_core::imitation::{reward_from_logit, sample_epsilon, DiscriminatorLearner};
use dsac_core::nets::{policy_log_prob, Discriminator, GaussianPolicy};
use dsac_core::replay::{Source, Trajectory};

/// Density of `a = tanh(u)`, `u ~ N(mu, exp(log_std)^2)`, at `n` midpoints
/// of `(-1, 1)`.
pub fn density_curve(mu: f64, log_std: f64, n: usize) -> Result<Vec<f64>, String> {
    let mut policy = GaussianPolicy::zeroed(1, 1, &[]).map_err(|e| e.to_string())?;
    let b = policy
        .params
        .get_mut("l0.b")
        .ok_or("policy has no output bias")?;
    b[0] = mu;
    b[1] = log_std;
    (0..n)
        .map(|i| {
            let a = -1.0 + (2.0 * i as f64 + 1.0) / n as f64;
            policy_log_prob(&policy, &[0.0], &[a])
                .map(f64::exp)
                .map_err(|e| e.to_string())
        })
        .collect()
}

/// Half-width of the square shown by the reward field.
pub const FIELD_EXTENT: f64 = 3.0;

/// A discriminator learning to tell two 2-D point clouds apart. The first
/// coordinate plays the state and the second the action.
pub struct RewardFieldModel {
    learner: DiscriminatorLearner,
    demo: Vec<[f64; 2]>,
    samp: Vec<[f64; 2]>,
    rng: ChaCha8Rng,
    steps: usize,
}

impl RewardFieldModel {
    pub fn new(seed: u64, gap: f64, points: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spread = Normal::new(0.0, 0.5).expect("positive spread");
        let cloud = |cx: f64, rng: &mut ChaCha8Rng| -> Vec<[f64; 2]> {
            (0..points)
                .map(|_| [cx + spread.sample(rng), spread.sample(rng)])
                .collect()
        };
        let demo = cloud(gap / 2.0, &mut rng);
        let samp = cloud(-gap / 2.0, &mut rng);
        let disc = Discriminator::new(2, &[16, 16], &mut rng).expect("valid layout");
        RewardFieldModel {
            learner: DiscriminatorLearner::new(disc, 3e-3, 10.0, AdamConfig::default()),
            demo,
            samp,
            rng,
            steps: 0,
        }
    }

    /// Runs `n` full-batch discriminator steps; returns the last loss.
    pub fn train(&mut self, n: usize, gp_coeff: f64) -> Result<f64, String> {
        self.learner.gp_coeff = gp_coeff;
        let demo = Tensor::from_rows(&self.demo).map_err(|e| e.to_string())?;
        let samp = Tensor::from_rows(&self.samp).map_err(|e| e.to_string())?;
        let mut loss = f64::NAN;
        for _ in 0..n {
            let eps = sample_epsilon(self.demo.len(), &mut self.rng);
            loss = self
                .learner
                .update_on(&demo, &samp, &eps)
                .map_err(|e| e.to_string())?;
            self.steps += 1;
        }
        Ok(loss)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Reward `log D - log(1 - D)` on a `res x res` grid over
    /// `[-FIELD_EXTENT, FIELD_EXTENT]^2`, row-major with y increasing.
    pub fn field(&self, res: usize) -> Vec<f64> {
        let coord = |i: usize| -FIELD_EXTENT + 2.0 * FIELD_EXTENT * (i as f64 + 0.5) / res as f64;
        let rows: Vec<[f64; 2]> = (0..res * res)
            .map(|k| [coord(k % res), coord(k / res)])
            .collect();
        let x = Tensor::from_rows(&rows).expect("rectangular grid");
        let d = &self.learner.disc;
        d.spec
            .eval(&d.params, &x)
            .data()
            .iter()
            .map(|&l| reward_from_logit(l))
            .collect()
    }

    /// Demo points then sample points, flattened `x, y` pairs.
    pub fn points(&self) -> Vec<f64> {
        self.demo
            .iter()
            .chain(&self.samp)
            .flatten()
            .copied()
            .collect()
    }
}

#[derive(Debug, Serialize)]
pub struct WrappedStep {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub bootstrap_mask: f64,
    pub next_absorbing: bool,
}

#[derive(Debug, Serialize)]
pub struct RolloutView {
    pub path: Vec<[f64; 2]>,
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub terminal: bool,
    pub truncated: bool,
    pub env_return: f64,
    pub transitions: usize,
    /// The final few stored transitions, where the wrapper makes changes.
    pub tail: Vec<WrappedStep>,
}

/// One point-goal episode under a noisy proportional controller, stored
/// with or without the absorbing-state wrapper.
pub fn rollout_view(seed: u64, noise: f64, wrapper: bool) -> Result<RolloutView, String> {
    let params = PointGoalParams::default();
    let mut env = PointGoal::with_params(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = vec![env.reset(&mut rng)];
    let mut actions = Vec::new();
    let (mut ret, mut terminal, mut truncated) = (0.0, false, false);
    while !(terminal || truncated) {
        let s = obs.last().expect("non-empty");
        let a: Vec<f64> = (0..2)
            .map(|k| {
                let drive = 2.0 * (params.goal[k] - s[k]) - 1.5 * s[k + 2];
                let n: f64 = StandardNormal.sample(&mut rng);
                (drive + noise * n).clamp(-1.0, 1.0)
            })
            .collect();
        let r = env.step(&a).map_err(|e| e.to_string())?;
        ret += r.env_reward;
        terminal = r.terminal;
        truncated = r.truncated;
        actions.push(a);
        obs.push(r.next_obs);
    }
    let path = obs.iter().map(|o| [o[0], o[1]]).collect();
    let traj = Trajectory {
        obs,
        actions,
        terminal,
        truncated,
        env_return: ret,
        augmented: false,
    };
    let stored = if wrapper {
        wrap_for_absorbing_states(&traj).map_err(|e| e.to_string())?
    } else {
        traj
    };
    let ts = stored.transitions_from(Source::Sample);
    let tail = ts[ts.len().saturating_sub(3)..]
        .iter()
        .map(|t| WrappedStep {
            next_absorbing: wrapper && is_absorbing(&t.next_obs),
            obs: t.obs.clone(),
            action: t.action.clone(),
            next_obs: t.next_obs.clone(),
            bootstrap_mask: t.bootstrap_mask,
        })
        .collect();
    Ok(RolloutView {
        path,
        goal: params.goal,
        goal_radius: params.goal_radius,
        terminal,
        truncated,
        env_return: ret,
        transitions: ts.len(),
        tail,
    })
}

#[wasm_bindgen]
pub fn squashed_density(mu: f64, log_std: f64, n: usize) -> Result<Vec<f64>, JsError> {
    density_curve(mu, log_std, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct RewardField(RewardFieldModel);

#[wasm_bindgen]
impl RewardField {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, gap: f64) -> RewardField {
        RewardField(RewardFieldModel::new(u64::from(seed), gap, 64))
    }

    pub fn train(&mut self, n: usize, gp_coeff: f64) -> Result<f64, JsError> {
        self.0.train(n, gp_coeff).map_err(|e| JsError::new(&e))
    }

    pub fn steps(&self) -> usize {
        self.0.steps()
    }

    pub fn field(&self, res: usize) -> Vec<f64> {
        self.0.field(res)
    }

    pub fn points(&self) -> Vec<f64> {
        self.0.points()
    }

    pub fn extent() -> f64 {
        FIELD_EXTENT
    }
}

/// JSON-encoded [`RolloutView`].
#[wasm_bindgen]
pub fn point_goal_rollout(seed: u32, noise: f64, wrapper: bool) -> Result<String, JsError> {
    let view = rollout_view(u64::from(seed), noise, wrapper).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&view).map_err(|e| JsError::new(&e.to_string()))
}
