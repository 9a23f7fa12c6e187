//! Network architectures as pure functions over [`ParamSet`]s: the
//! tanh-squashed Gaussian policy, twin soft-Q critics and the sigmoid
//! discriminator.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::diff::{Bound, ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Added inside `log(1 - tanh(u)^2 + eps)` of the squash correction.
pub const TANH_EPS: f64 = 1e-6;
/// Discriminator probabilities are clamped to `[DISC_CLAMP, 1 - DISC_CLAMP]`.
pub const DISC_CLAMP: f64 = 1e-7;
/// Stored actions are clamped to `±(1 - ACTION_CLAMP)` before `atanh`.
pub const ACTION_CLAMP: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

/// Fully connected network layout. Parameters are named `l{i}.w` (`[in, out]`)
/// and `l{i}.b` (`[out]`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        output_dim: usize,
        activation: Activation,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "invalid MLP layout {input_dim} -> {hidden_dims:?} -> {output_dim}"
            )));
        }
        Ok(MlpSpec {
            input_dim,
            hidden_dims,
            output_dim,
            activation,
        })
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in self
            .hidden_dims
            .iter()
            .chain(std::iter::once(&self.output_dim))
        {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }

    /// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`
    /// for weights and biases alike.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamSet {
        let mut p = ParamSet::new();
        for (i, (fan_in, fan_out)) in self.layer_dims().into_iter().enumerate() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let w = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
            let b = (0..fan_out).map(|_| dist.sample(rng)).collect();
            p.insert(
                format!("l{i}.w"),
                Tensor::from_raw(vec![fan_in, fan_out], w),
            )
            .expect("unique layer names");
            p.insert(format!("l{i}.b"), Tensor::from_raw(vec![fan_out], b))
                .expect("unique layer names");
        }
        p
    }

    pub fn zeros(&self) -> ParamSet {
        let mut p = ParamSet::new();
        for (i, (fan_in, fan_out)) in self.layer_dims().into_iter().enumerate() {
            p.insert(format!("l{i}.w"), Tensor::zeros(&[fan_in, fan_out]))
                .expect("unique layer names");
            p.insert(format!("l{i}.b"), Tensor::zeros(&[fan_out]))
                .expect("unique layer names");
        }
        p
    }

    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        self.zeros().check_same_layout(params)
    }

    fn activate<'t>(&self, z: Var<'t>) -> Var<'t> {
        match self.activation {
            Activation::Relu => z.relu(),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Forward pass of `x: [batch, input_dim]`.
    pub fn forward<'t>(&self, params: &Bound<'t>, x: Var<'t>) -> Var<'t> {
        self.forward_with_hidden(params, x).0
    }

    /// Forward pass that also returns each hidden pre-activation and
    /// activation, needed for input gradients.
    fn forward_with_hidden<'t>(
        &self,
        params: &Bound<'t>,
        x: Var<'t>,
    ) -> (Var<'t>, Vec<(Var<'t>, Var<'t>)>) {
        let n_layers = self.hidden_dims.len() + 1;
        let mut h = x;
        let mut hidden = Vec::with_capacity(n_layers - 1);
        for i in 0..n_layers {
            let z = h.matmul(params[2 * i]).add_row(params[2 * i + 1]);
            if i + 1 < n_layers {
                h = self.activate(z);
                hidden.push((z, h));
            } else {
                h = z;
            }
        }
        (h, hidden)
    }

    /// Gradient of the (scalar) network output with respect to each input
    /// row, built from differentiable ops so it can itself be
    /// back-propagated into the parameters.
    pub fn input_gradient<'t>(&self, params: &Bound<'t>, x: Var<'t>) -> Var<'t> {
        assert_eq!(self.output_dim, 1, "input_gradient needs a scalar output");
        let tape = x.tape();
        let (_, hidden) = self.forward_with_hidden(params, x);
        let batch = x.shape()[0];
        let n_layers = self.hidden_dims.len() + 1;
        // d out / d h_last = ones · w_lastᵀ
        let ones = tape.constant(Tensor::full(&[batch, 1], 1.0));
        let mut g = ones.matmul_nt(params[2 * (n_layers - 1)]);
        for i in (0..n_layers - 1).rev() {
            let (z, h) = hidden[i];
            let dact = match self.activation {
                Activation::Tanh => h.square().neg().add_scalar(1.0),
                Activation::Relu => {
                    let mask: Vec<f64> = z
                        .value()
                        .data()
                        .iter()
                        .map(|&v| if v > 0.0 { 1.0 } else { 0.0 })
                        .collect();
                    tape.constant(Tensor::from_raw(z.shape(), mask))
                }
            };
            g = (g * dact).matmul_nt(params[2 * i]);
        }
        g
    }

    /// Gradient-free convenience forward pass.
    pub fn eval(&self, params: &ParamSet, x: &Tensor) -> Tensor {
        let tape = Tape::new();
        let bound = tape.bind_const(params);
        self.forward(&bound, tape.constant(x.clone())).value()
    }
}

/// Hidden layer widths for the three network families.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetProfile {
    pub name: String,
    pub policy_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
}

impl NetProfile {
    /// Full-size layout: 256x2 ReLU actor/critic, 100x2 tanh discriminator.
    pub fn full() -> Self {
        NetProfile {
            name: "full".into(),
            policy_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            disc_hidden: vec![100, 100],
        }
    }

    pub fn desk() -> Self {
        NetProfile {
            name: "desk".into(),
            policy_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            disc_hidden: vec![32, 32],
        }
    }

    /// Smallest profile, used where many end-to-end runs must fit a tight
    /// time budget.
    pub fn small() -> Self {
        NetProfile {
            name: "small".into(),
            policy_hidden: vec![32, 32],
            critic_hidden: vec![32, 32],
            disc_hidden: vec![32, 32],
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Self::full()),
            "desk" => Ok(Self::desk()),
            "small" => Ok(Self::small()),
            other => Err(Error::Config(format!(
                "profile: unknown network profile `{other}` (expected full, desk or small)"
            ))),
        }
    }
}

fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op: what.into() })
    }
}

fn check_dim(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{what}: expected dimension {want}, got {got}"
        )))
    }
}

/// Tanh-squashed diagonal Gaussian policy. The MLP emits `(mu, log_std)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub spec: MlpSpec,
    pub params: ParamSet,
}

/// Differentiable outputs of a reparameterized policy sample.
pub struct PolicySample<'t> {
    /// `[batch, act_dim]`, strictly inside `(-1, 1)`.
    pub action: Var<'t>,
    /// `[batch, 1]`
    pub log_prob: Var<'t>,
    /// Pre-squash mean, `[batch, act_dim]`.
    pub mean: Var<'t>,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let spec = MlpSpec::new(obs_dim, hidden.to_vec(), 2 * act_dim, Activation::Relu)?;
        let params = spec.init(rng);
        Ok(GaussianPolicy { spec, params })
    }

    /// All-zero parameters: `mu = 0`, `log_std = 0` everywhere.
    pub fn zeroed(obs_dim: usize, act_dim: usize, hidden: &[usize]) -> Result<Self> {
        let spec = MlpSpec::new(obs_dim, hidden.to_vec(), 2 * act_dim, Activation::Relu)?;
        let params = spec.zeros();
        Ok(GaussianPolicy { spec, params })
    }

    pub fn obs_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn act_dim(&self) -> usize {
        self.spec.output_dim / 2
    }

    fn head<'t>(&self, params: &Bound<'t>, states: Var<'t>) -> (Var<'t>, Var<'t>) {
        let a = self.act_dim();
        let out = self.spec.forward(params, states);
        let mean = out.slice_cols(0, a);
        let log_std = out.slice_cols(a, 2 * a).clamp(LOG_STD_MIN, LOG_STD_MAX);
        (mean, log_std)
    }

    /// Reparameterized sample `a = tanh(mu + sigma * noise)` with its
    /// log-density, on the tape.
    pub fn sample_on<'t>(
        &self,
        params: &Bound<'t>,
        states: Var<'t>,
        noise: &Tensor,
    ) -> PolicySample<'t> {
        let tape = states.tape();
        let (mean, log_std) = self.head(params, states);
        let eps = tape.constant(noise.clone());
        let u = mean + log_std.exp() * eps;
        let action = u.tanh();
        let (rows, cols) = noise.dims2();
        let base: Vec<f64> = (0..rows)
            .map(|r| {
                noise.data()[r * cols..(r + 1) * cols]
                    .iter()
                    .map(|e| -0.5 * e * e - HALF_LN_2PI)
                    .sum()
            })
            .collect();
        let base = tape.constant(Tensor::from_raw(vec![rows, 1], base));
        let squash = action
            .square()
            .neg()
            .add_scalar(1.0 + TANH_EPS)
            .ln()
            .sum_cols();
        let log_prob = base - log_std.sum_cols() - squash;
        PolicySample {
            action,
            log_prob,
            mean,
        }
    }

    /// Log-density of given actions (already in `(-1, 1)`), on the tape.
    pub fn log_prob_on<'t>(
        &self,
        params: &Bound<'t>,
        states: Var<'t>,
        actions: &Tensor,
    ) -> Result<Var<'t>> {
        let tape = states.tape();
        let lim = 1.0 - ACTION_CLAMP;
        let clamped: Vec<f64> = actions.data().iter().map(|a| a.clamp(-lim, lim)).collect();
        if clamped.iter().any(|a| !(a.abs() < 1.0)) {
            return Err(Error::InvalidArgument("action outside (-1, 1)".into()));
        }
        let pre: Vec<f64> = clamped.iter().map(|a| a.atanh()).collect();
        let squash_vals: Vec<f64> = clamped
            .iter()
            .map(|a| (1.0 - a * a + TANH_EPS).ln())
            .collect();
        let shape = actions.shape().to_vec();
        let (rows, cols) = actions.dims2();
        let squash_rows: Vec<f64> = squash_vals.chunks(cols).map(|c| c.iter().sum()).collect();

        let (mean, log_std) = self.head(params, states);
        let u = tape.constant(Tensor::from_raw(shape, pre));
        let z = (u - mean) * log_std.neg().exp();
        let per_dim = z.square().scale(-0.5).add_scalar(-HALF_LN_2PI) - log_std;
        let squash = tape.constant(Tensor::from_raw(vec![rows, 1], squash_rows));
        Ok(per_dim.sum_cols() - squash)
    }

    /// Batched gradient-free sample: actions `[batch, act_dim]` and log-probs.
    pub fn sample_batch(&self, states: &Tensor, noise: &Tensor) -> Result<(Tensor, Vec<f64>)> {
        check_finite("policy_sample (state)", states.data())?;
        let tape = Tape::new();
        let bound = tape.bind_const(&self.params);
        let s = self.sample_on(&bound, tape.constant(states.clone()), noise);
        if let Some(op) = tape.fault() {
            return Err(Error::NonFinite { op });
        }
        Ok((s.action.value(), s.log_prob.value().into_data()))
    }

    /// Deterministic action `tanh(mu(s))` for a batch of states.
    pub fn mean_action_batch(&self, states: &Tensor) -> Result<Tensor> {
        check_finite("policy_mean_action (state)", states.data())?;
        let tape = Tape::new();
        let bound = tape.bind_const(&self.params);
        let (mean, _) = self.head(&bound, tape.constant(states.clone()));
        Ok(mean.tanh().value())
    }
}

/// Samples one action for state `s` with externally supplied standard-normal
/// `noise`; returns the action and its log-density.
pub fn policy_sample(p: &GaussianPolicy, s: &[f64], noise: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_dim("policy_sample state", s.len(), p.obs_dim())?;
    check_dim("policy_sample noise", noise.len(), p.act_dim())?;
    let (a, lp) = p.sample_batch(&Tensor::row(s), &Tensor::row(noise))?;
    Ok((a.into_data(), lp[0]))
}

/// Evaluation-time action without sampling noise.
pub fn policy_mean_action(p: &GaussianPolicy, s: &[f64]) -> Result<Vec<f64>> {
    check_dim("policy_mean_action state", s.len(), p.obs_dim())?;
    Ok(p.mean_action_batch(&Tensor::row(s))?.into_data())
}

/// Log-density of action `a` at state `s` under the squashed Gaussian.
pub fn policy_log_prob(p: &GaussianPolicy, s: &[f64], a: &[f64]) -> Result<f64> {
    check_dim("policy_log_prob state", s.len(), p.obs_dim())?;
    check_dim("policy_log_prob action", a.len(), p.act_dim())?;
    check_finite("policy_log_prob (state)", s)?;
    let tape = Tape::new();
    let bound = tape.bind_const(&p.params);
    let lp = p.log_prob_on(&bound, tape.constant(Tensor::row(s)), &Tensor::row(a))?;
    Ok(lp.item())
}

/// One soft-Q critic over concatenated `(state, action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QNet {
    pub spec: MlpSpec,
    pub obs_dim: usize,
    pub act_dim: usize,
}

impl QNet {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: &[usize]) -> Result<Self> {
        Ok(QNet {
            spec: MlpSpec::new(obs_dim + act_dim, hidden.to_vec(), 1, Activation::Relu)?,
            obs_dim,
            act_dim,
        })
    }

    /// `[batch, 1]` Q-values.
    pub fn forward<'t>(&self, params: &Bound<'t>, states: Var<'t>, actions: Var<'t>) -> Var<'t> {
        let x = states.tape().concat_cols(&[states, actions]);
        self.spec.forward(params, x)
    }
}

/// Two critics that share no parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinQ {
    pub net: QNet,
    pub q1: ParamSet,
    pub q2: ParamSet,
}

impl TwinQ {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let net = QNet::new(obs_dim, act_dim, hidden)?;
        let q1 = net.spec.init(rng);
        let q2 = net.spec.init(rng);
        Ok(TwinQ { net, q1, q2 })
    }

    pub fn zeroed(obs_dim: usize, act_dim: usize, hidden: &[usize]) -> Result<Self> {
        let net = QNet::new(obs_dim, act_dim, hidden)?;
        let q1 = net.spec.zeros();
        let q2 = net.spec.zeros();
        Ok(TwinQ { net, q1, q2 })
    }

    /// Gradient-free batch evaluation of both critics.
    pub fn eval_batch(&self, states: &Tensor, actions: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
        let tape = Tape::new();
        let s = tape.constant(states.clone());
        let a = tape.constant(actions.clone());
        let b1 = tape.bind_const(&self.q1);
        let b2 = tape.bind_const(&self.q2);
        let v1 = self.net.forward(&b1, s, a).value().into_data();
        let v2 = self.net.forward(&b2, s, a).value().into_data();
        if let Some(op) = tape.fault() {
            return Err(Error::NonFinite { op });
        }
        Ok((v1, v2))
    }
}

/// Both critic estimates for one `(s, a)` pair.
pub fn q_values(q: &TwinQ, s: &[f64], a: &[f64]) -> Result<(f64, f64)> {
    check_dim("q_values state", s.len(), q.net.obs_dim)?;
    check_dim("q_values action", a.len(), q.net.act_dim)?;
    let (v1, v2) = q.eval_batch(&Tensor::row(s), &Tensor::row(a))?;
    Ok((v1[0], v2[0]))
}

/// Demo-vs-sample classifier over concatenated `(state, action)`, producing a
/// pre-sigmoid logit.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub spec: MlpSpec,
    pub params: ParamSet,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let spec = MlpSpec::new(input_dim, hidden.to_vec(), 1, Activation::Tanh)?;
        let params = spec.init(rng);
        Ok(Discriminator { spec, params })
    }

    pub fn zeroed(input_dim: usize, hidden: &[usize]) -> Result<Self> {
        let spec = MlpSpec::new(input_dim, hidden.to_vec(), 1, Activation::Tanh)?;
        let params = spec.zeros();
        Ok(Discriminator { spec, params })
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    /// `[batch, 1]` logits.
    pub fn logit_on<'t>(&self, params: &Bound<'t>, x: Var<'t>) -> Var<'t> {
        self.spec.forward(params, x)
    }

    /// Clamped probabilities for a batch `[batch, input_dim]`.
    pub fn prob_batch(&self, x: &Tensor) -> Result<Vec<f64>> {
        check_dim("discriminator input", x.dims2().1, self.input_dim())?;
        let logits = self.spec.eval(&self.params, x);
        if !logits.is_finite() {
            return Err(Error::NonFinite {
                op: "discriminator logit".into(),
            });
        }
        Ok(logits.data().iter().map(|&l| prob_from_logit(l)).collect())
    }
}

/// `sigmoid(logit)` clamped to `[DISC_CLAMP, 1 - DISC_CLAMP]`.
pub fn prob_from_logit(logit: f64) -> f64 {
    let p = if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    };
    p.clamp(DISC_CLAMP, 1.0 - DISC_CLAMP)
}

/// `D(s, a)` in `[DISC_CLAMP, 1 - DISC_CLAMP]`.
pub fn discriminator_prob(d: &Discriminator, s: &[f64], a: &[f64]) -> Result<f64> {
    let x: Vec<f64> = s.iter().chain(a).copied().collect();
    check_dim("discriminator_prob input", x.len(), d.input_dim())?;
    Ok(d.prob_batch(&Tensor::row(&x))?[0])
}
