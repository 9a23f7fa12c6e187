use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators mirroring a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ParamSet,
    pub v: ParamSet,
    pub step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &ParamSet,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate {lr}")));
    }
    params.check_same_layout(grads)?;
    params.check_same_layout(&state.m)?;
    if !grads.is_finite() {
        return Err(Error::NonFinite {
            op: "adam_step (gradient)".into(),
        });
    }
    let AdamConfig { beta1, beta2, eps } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    state
        .m
        .update(grads, |m, g| *m = beta1 * *m + (1.0 - beta1) * g)?;
    state
        .v
        .update(grads, |v, g| *v = beta2 * *v + (1.0 - beta2) * g * g)?;

    let m = state.m.flatten();
    let v = state.v.flatten();
    let mut i = 0;
    let mut step_fn = |p: &mut f64, _g: f64| {
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
        i += 1;
    };
    params.update(grads, &mut step_fn)
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut ParamSet, max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0) {
        return Err(Error::InvalidArgument(format!("max_norm {max_norm}")));
    }
    let norm = grads.global_norm();
    if !norm.is_finite() {
        return Err(Error::NonFinite {
            op: "clip_global_norm".into(),
        });
    }
    if norm > max_norm {
        let scale = max_norm / norm;
        let zeros = grads.zeros_like();
        grads.update(&zeros, |g, _| *g *= scale)?;
    }
    Ok(norm)
}

/// Step-decayed learning rate: `initial_lr * decay^(step / interval)`.
pub fn lr_at_step(step: u64, initial_lr: f64, decay: f64, interval: u64) -> f64 {
    assert!(interval > 0, "decay interval must be positive");
    let k = (step / interval).min(i32::MAX as u64) as i32;
    initial_lr * decay.powi(k)
}
