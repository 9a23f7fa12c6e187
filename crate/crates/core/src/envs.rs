//! Desk-scale continuous-control environments and the absorbing-state
//! wrapper.
//!
//! Both environments take actions in `[-1, 1]^act_dim`; anything outside is
//! clamped. `terminal` marks a true episode end, `truncated` a time-limit
//! cutoff. The two are never both set.

use std::f64::consts::PI;

use indexmap::IndexMap;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::Trajectory;

pub const POINT_GOAL: &str = "point_goal_v1";
pub const PENDULUM: &str = "pendulum_v1";

/// Static description of an environment. The constants are written into
/// demonstration files and compared on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub time_limit: usize,
    pub constants: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_obs: Vec<f64>,
    /// Task reward. Used for expert training and reporting only.
    pub env_reward: f64,
    pub terminal: bool,
    pub truncated: bool,
}

pub trait Env {
    fn spec(&self) -> &EnvSpec;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

pub fn make_env(name: &str) -> Result<Box<dyn Env + Send>> {
    match name {
        POINT_GOAL => Ok(Box::new(PointGoal::new())),
        PENDULUM => Ok(Box::new(Pendulum::new())),
        other => Err(Error::Config(format!(
            "env: unknown environment `{other}` (expected {POINT_GOAL} or {PENDULUM})"
        ))),
    }
}

pub fn env_spec(name: &str) -> Result<EnvSpec> {
    Ok(make_env(name)?.spec().clone())
}

fn finite(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op: what.into() })
    }
}

fn clamp_action(action: &[f64], dim: usize, what: &str) -> Result<Vec<f64>> {
    if action.len() != dim {
        return Err(Error::Shape(format!(
            "{what}: action has {} components, expected {dim}",
            action.len()
        )));
    }
    finite(what, action)?;
    Ok(action.iter().map(|a| a.clamp(-1.0, 1.0)).collect())
}

// ---------------------------------------------------------------------------
// Point mass driven to a fixed goal.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGoalParams {
    pub damping: f64,
    pub accel: f64,
    pub dt: f64,
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub time_limit: usize,
}

impl Default for PointGoalParams {
    fn default() -> Self {
        PointGoalParams {
            damping: 0.95,
            accel: 0.1,
            dt: 0.05,
            goal: [0.8, 0.8],
            goal_radius: 0.1,
            time_limit: 200,
        }
    }
}

/// One transition of the point-goal dynamics, without time-limit handling.
/// `state = (x, y, vx, vy)`. Returns `(next_state, reward, terminal)`.
pub fn point_goal_dynamics(
    params: &PointGoalParams,
    state: &[f64; 4],
    action: &[f64],
) -> Result<([f64; 4], f64, bool)> {
    finite("point_goal_step (state)", state)?;
    let a = clamp_action(action, 2, "point_goal_step")?;
    let vx = params.damping * state[2] + params.accel * a[0];
    let vy = params.damping * state[3] + params.accel * a[1];
    let x = state[0] + params.dt * vx;
    let y = state[1] + params.dt * vy;
    let dist = ((x - params.goal[0]).powi(2) + (y - params.goal[1]).powi(2)).sqrt();
    Ok(([x, y, vx, vy], -dist, dist < params.goal_radius))
}

#[derive(Debug, Clone)]
pub struct PointGoal {
    params: PointGoalParams,
    spec: EnvSpec,
    state: [f64; 4],
    t: usize,
}

impl PointGoal {
    pub fn new() -> Self {
        Self::with_params(PointGoalParams::default())
    }

    pub fn with_params(params: PointGoalParams) -> Self {
        let mut constants = IndexMap::new();
        constants.insert("damping".to_string(), params.damping);
        constants.insert("accel".to_string(), params.accel);
        constants.insert("dt".to_string(), params.dt);
        constants.insert("goal_x".to_string(), params.goal[0]);
        constants.insert("goal_y".to_string(), params.goal[1]);
        constants.insert("goal_radius".to_string(), params.goal_radius);
        PointGoal {
            spec: EnvSpec {
                name: POINT_GOAL.into(),
                obs_dim: 4,
                act_dim: 2,
                time_limit: params.time_limit,
                constants,
            },
            params,
            state: [0.0; 4],
            t: 0,
        }
    }

    /// Places the point at `state` and restarts the step counter.
    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
        self.t = 0;
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }
}

impl Default for PointGoal {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for PointGoal {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let x = rng.random_range(-1.0..=1.0);
        let y = rng.random_range(-1.0..=1.0);
        self.set_state([x, y, 0.0, 0.0]);
        self.state.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let (next, reward, terminal) = point_goal_dynamics(&self.params, &self.state, action)?;
        self.state = next;
        self.t += 1;
        Ok(StepResult {
            next_obs: next.to_vec(),
            env_reward: reward,
            terminal,
            truncated: !terminal && self.t >= self.params.time_limit,
        })
    }
}

// ---------------------------------------------------------------------------
// Torque-limited pendulum swing-up. theta = 0 is upright.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    pub g: f64,
    pub m: f64,
    pub l: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub max_torque: f64,
    pub time_limit: usize,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            g: 10.0,
            m: 1.0,
            l: 1.0,
            dt: 0.05,
            max_speed: 8.0,
            max_torque: 2.0,
            time_limit: 200,
        }
    }
}

fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// One pendulum transition on `obs = (cos θ, sin θ, θ̇)`.
/// Returns `(next_obs, reward)`; the pendulum never terminates.
pub fn pendulum_step(
    params: &PendulumParams,
    obs: &[f64; 3],
    action: &[f64],
) -> Result<([f64; 3], f64)> {
    finite("pendulum_step (state)", obs)?;
    let norm = obs[0] * obs[0] + obs[1] * obs[1];
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "pendulum_step: cos^2 + sin^2 = {norm}, expected 1"
        )));
    }
    let a = clamp_action(action, 1, "pendulum_step")?;
    let u = params.max_torque * a[0];
    let th = obs[1].atan2(obs[0]);
    let thdot = obs[2];
    let PendulumParams { g, m, l, dt, .. } = *params;

    let cost = angle_normalize(th).powi(2) + 0.1 * thdot * thdot + 0.001 * u * u;
    let thddot = -3.0 * g / (2.0 * l) * (th + PI).sin() + 3.0 / (m * l * l) * u;
    let new_thdot = (thdot + thddot * dt).clamp(-params.max_speed, params.max_speed);
    let new_th = th + new_thdot * dt;
    Ok(([new_th.cos(), new_th.sin(), new_thdot], -cost))
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    params: PendulumParams,
    spec: EnvSpec,
    obs: [f64; 3],
    t: usize,
}

impl Pendulum {
    pub fn new() -> Self {
        let params = PendulumParams::default();
        let mut constants = IndexMap::new();
        constants.insert("g".to_string(), params.g);
        constants.insert("m".to_string(), params.m);
        constants.insert("l".to_string(), params.l);
        constants.insert("dt".to_string(), params.dt);
        constants.insert("max_speed".to_string(), params.max_speed);
        constants.insert("max_torque".to_string(), params.max_torque);
        Pendulum {
            spec: EnvSpec {
                name: PENDULUM.into(),
                obs_dim: 3,
                act_dim: 1,
                time_limit: params.time_limit,
                constants,
            },
            params,
            obs: [1.0, 0.0, 0.0],
            t: 0,
        }
    }

    pub fn set_angle(&mut self, theta: f64, theta_dot: f64) {
        self.obs = [theta.cos(), theta.sin(), theta_dot];
        self.t = 0;
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let th = rng.random_range(-PI..=PI);
        let thdot = rng.random_range(-1.0..=1.0);
        self.set_angle(th, thdot);
        self.obs.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let (next, reward) = pendulum_step(&self.params, &self.obs, action)?;
        self.obs = next;
        self.t += 1;
        Ok(StepResult {
            next_obs: next.to_vec(),
            env_reward: reward,
            terminal: false,
            truncated: self.t >= self.params.time_limit,
        })
    }
}

// ---------------------------------------------------------------------------
// Absorbing states.

/// Appends the absorbing indicator: `(obs, 0)` normally, `(0, …, 0, 1)` for
/// the absorbing state.
pub fn augment(obs: &[f64], is_absorbing: bool) -> Vec<f64> {
    if is_absorbing {
        absorbing_obs(obs.len())
    } else {
        let mut v = Vec::with_capacity(obs.len() + 1);
        v.extend_from_slice(obs);
        v.push(0.0);
        v
    }
}

/// Canonical absorbing state for a base observation of `base_dim`.
pub fn absorbing_obs(base_dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; base_dim + 1];
    v[base_dim] = 1.0;
    v
}

/// True for an augmented observation whose indicator is set.
pub fn is_absorbing(augmented_obs: &[f64]) -> bool {
    augmented_obs.last() == Some(&1.0)
}

/// Rewrites an episode that ended in a true terminal state so the terminal
/// step leads into the absorbing state, followed by one absorbing self-loop
/// with the zero action. Time-limit endings are only augmented. All
/// observations in the result carry the indicator component. Trajectories
/// that are already augmented are returned unchanged.
pub fn wrap_for_absorbing_states(traj: &Trajectory) -> Result<Trajectory> {
    if traj.actions.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot wrap an empty trajectory".into(),
        ));
    }
    if traj.augmented {
        return Ok(traj.clone());
    }
    let base_dim = traj.obs[0].len();
    let act_dim = traj.actions[0].len();
    let mut obs: Vec<Vec<f64>> = traj.obs.iter().map(|o| augment(o, false)).collect();
    let mut actions = traj.actions.clone();
    if traj.terminal && !traj.truncated {
        *obs.last_mut().expect("non-empty") = absorbing_obs(base_dim);
        obs.push(absorbing_obs(base_dim));
        actions.push(vec![0.0; act_dim]);
    }
    Ok(Trajectory {
        obs,
        actions,
        terminal: traj.terminal,
        truncated: traj.truncated,
        env_return: traj.env_return,
        augmented: true,
    })
}
