//! Imitation-learning laboratory: a small reverse-mode autodiff core, soft
//! actor-critic, SQIL and discriminator soft actor-critic (DSAC) learners,
//! behavioral cloning, two toy continuous-control environments and the
//! experiment pipeline that ties them together.
//!
//! Module map:
//!
//! * [`diff`] - dense `f64` tensors, the tape, parameter sets, Adam, clipping.
//! * [`nets`] - squashed-Gaussian policy, twin soft-Q critics, discriminator.
//! * [`envs`] - point-goal and pendulum environments, absorbing-state wrapper.
//! * [`replay`] - transitions, trajectories, replay buffers, demo files.
//! * [`rng`] - named random substreams of one root seed.
//! * [`rollout`] - episode collection and deterministic evaluation.
//! * [`sac`] - soft actor-critic losses and the update step.
//! * [`imitation`] - reward providers, discriminator training, DSAC/SQIL/BC.
//! * [`harness`] - run configuration, training pipelines, metrics, plots.

pub mod diff;
pub mod envs;
pub mod error;
pub mod harness;
pub mod imitation;
pub mod nets;
pub mod replay;
pub mod rng;
pub mod rollout;
pub mod sac;

pub use error::{Error, Result};
