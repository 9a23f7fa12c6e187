//! Minimal dense-tensor reverse-mode autodiff with Adam, global-norm clipping
//! and a step-decay learning-rate schedule.

mod optim;
mod params;
mod tape;
mod tensor;

pub use optim::{adam_step, clip_global_norm, lr_at_step, AdamConfig, AdamState};
pub use params::{ParamDoc, ParamSet, TensorDoc, PARAMS_FORMAT_VERSION};
pub use tape::{backward, Bound, Gradients, Tape, Var};
pub use tensor::Tensor;
