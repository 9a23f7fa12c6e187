//! Training, recording, evaluation and sweep pipelines.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use log::{debug, info, warn};

use super::checkpoint::Checkpoint;
use super::config::RunConfig;
use super::metrics::{write_metrics, MetricsRow};
use crate::diff::AdamConfig;
use crate::envs::wrap_for_absorbing_states;
use crate::envs::{env_spec, make_env, Env, EnvSpec};
use crate::error::{Error, Result};
use crate::imitation::{
    dsac_train_iteration, Algo, BcLearner, DiscriminatorLearner, ImitationAgent, IterationMetrics,
};
use crate::nets::{Discriminator, GaussianPolicy};
use crate::replay::{DemoMeta, DemoSet, ReplayBuffer, RewardedTransition, Source};
use crate::rng::{stream, RunRngs, Stream};
use crate::rollout::{collect_episode, evaluate_policy, mean_std, Actor};
use crate::sac::{RewardedBatch, SacLearner, SacParams};

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    /// `(step, seconds since start)` at every evaluation.
    pub timing: Vec<(u64, f64)>,
    /// Final parameters, or for expert training the best-evaluated ones.
    pub checkpoint: Checkpoint,
    /// Expert training only: the final parameters.
    pub final_checkpoint: Option<Checkpoint>,
    /// One entry per collected episode (imitation runs only).
    pub iterations: Vec<IterationMetrics>,
    pub stopped_early: bool,
}

impl RunOutput {
    /// Writes `config.txt`, `metrics.csv`, `timing.csv`, `checkpoint.json`
    /// and, when present, `iterations.csv` and `final_checkpoint.json` into
    /// `dir`.
    pub fn write(&self, dir: &Path, cfg: &RunConfig) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join("config.txt");
        std::fs::write(&p, cfg.to_text()).map_err(|e| Error::io(&p, e))?;
        write_metrics(&dir.join("metrics.csv"), &self.rows)?;
        let mut t = String::from("step,wall_time_s\n");
        for (s, w) in &self.timing {
            let _ = writeln!(t, "{s},{w:.3}");
        }
        let p = dir.join("timing.csv");
        std::fs::write(&p, t).map_err(|e| Error::io(&p, e))?;
        if !self.iterations.is_empty() {
            let p = dir.join("iterations.csv");
            std::fs::write(&p, iterations_to_csv(&self.iterations))
                .map_err(|e| Error::io(&p, e))?;
        }
        if let Some(ck) = &self.final_checkpoint {
            ck.save(&dir.join("final_checkpoint.json"))?;
        }
        self.checkpoint.save(&dir.join("checkpoint.json"))
    }
}

pub const ITERATIONS_HEADER: &str = "env_steps,episode_steps,episode_return,updates,demo_reward_mean,samp_reward_mean,critic_loss,actor_loss,disc_loss,alpha";

pub fn iterations_to_csv(its: &[IterationMetrics]) -> String {
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = format!("{ITERATIONS_HEADER}\n");
    for m in its {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            m.env_steps,
            m.episode_steps,
            m.episode_return,
            m.updates,
            cell(m.demo_reward_mean),
            cell(m.samp_reward_mean),
            cell(m.critic_loss),
            cell(m.actor_loss),
            cell(m.disc_loss),
            m.alpha
        );
    }
    out
}

/// Deterministic evaluation with the same reset sequence every time.
struct Evaluator {
    env: Box<dyn Env + Send>,
    episodes: usize,
    seed: u64,
    augmented: bool,
}

impl Evaluator {
    fn new(cfg: &RunConfig, augmented: bool) -> Result<Self> {
        Ok(Evaluator {
            env: make_env(cfg.env_name()?)?,
            episodes: cfg.eval_episodes,
            seed: cfg.seed,
            augmented,
        })
    }

    fn run(&mut self, policy: &GaussianPolicy) -> Result<(f64, f64)> {
        let mut rng = stream(self.seed, Stream::Eval);
        let returns = evaluate_policy(
            self.env.as_mut(),
            policy,
            self.episodes,
            self.augmented,
            &mut rng,
        )?;
        Ok(mean_std(&returns))
    }
}

/// Update-weighted running means between evaluation rows.
#[derive(Default)]
struct Interval {
    sums: [f64; 5],
    counts: [usize; 5],
}

impl Interval {
    fn add(&mut self, i: usize, mean: Option<f64>, n: usize) {
        if let Some(m) = mean {
            self.sums[i] += m * n as f64;
            self.counts[i] += n;
        }
    }

    fn mean(&self, i: usize) -> Option<f64> {
        (self.counts[i] > 0).then(|| self.sums[i] / self.counts[i] as f64)
    }

    fn take_row(&mut self, step: u64, eval: (f64, f64), alpha: Option<f64>) -> MetricsRow {
        let row = MetricsRow {
            step,
            eval_mean: eval.0,
            eval_std: eval.1,
            demo_reward_mean: self.mean(0),
            samp_reward_mean: self.mean(1),
            critic_loss: self.mean(2),
            actor_loss: self.mean(3),
            disc_loss: self.mean(4),
            alpha,
            wall_time_s: 0.0,
        };
        *self = Interval::default();
        row
    }
}

/// Bookkeeping shared by every training loop: evaluation cadence, rows,
/// timing and early stopping.
struct Recorder {
    evaluator: Evaluator,
    interval: Interval,
    rows: Vec<MetricsRow>,
    timing: Vec<(u64, f64)>,
    start: Instant,
    eval_interval: u64,
    record_wall_time: bool,
    stop_at: Option<f64>,
    stop: bool,
}

impl Recorder {
    fn new(cfg: &RunConfig, augmented: bool) -> Result<Self> {
        Ok(Recorder {
            evaluator: Evaluator::new(cfg, augmented)?,
            interval: Interval::default(),
            rows: Vec::new(),
            timing: Vec::new(),
            start: Instant::now(),
            eval_interval: cfg.eval_interval,
            record_wall_time: cfg.record_wall_time,
            stop_at: cfg.stop_at_return,
            stop: false,
        })
    }

    fn on_step(&mut self, step: u64, policy: &GaussianPolicy, alpha: Option<f64>) -> Result<()> {
        if step % self.eval_interval != 0 {
            return Ok(());
        }
        let eval = self.evaluator.run(policy)?;
        let mut row = self.interval.take_row(step, eval, alpha);
        let secs = self.start.elapsed().as_secs_f64();
        if self.record_wall_time {
            row.wall_time_s = secs;
        }
        info!("step {step}: eval {:.3} ± {:.3}", eval.0, eval.1);
        self.rows.push(row);
        self.timing.push((step, secs));
        if self.stop_at.is_some_and(|t| eval.0 >= t) {
            self.stop = true;
        }
        Ok(())
    }
}

fn init_sac(
    cfg: &RunConfig,
    spec: &EnvSpec,
    augmented: bool,
    rngs: &mut RunRngs,
) -> Result<SacParams> {
    let prof = cfg.net_profile()?;
    let mut p = SacParams::new(
        spec.obs_dim + usize::from(augmented),
        spec.act_dim,
        &prof.policy_hidden,
        &prof.critic_hidden,
        cfg.init_alpha,
        augmented,
        &mut rngs.init,
    )?;
    if let Some(t) = cfg.entropy_target {
        p.entropy_target = t;
    }
    Ok(p)
}

/// Trains SAC on the environment's own reward. Updates follow each
/// episode, one per collected step, with uniform random actions until
/// `warm_up` steps have been collected.
pub fn train_expert(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let spec = env_spec(cfg.env_name()?)?;
    let total = cfg.expert_steps_resolved()?;
    let mut rngs = RunRngs::new(cfg.seed);
    let mut learner = SacLearner::new(init_sac(cfg, &spec, false, &mut rngs)?, cfg.sac_config());
    let mut env = make_env(&spec.name)?;
    let mut buffer: ReplayBuffer<RewardedTransition> = ReplayBuffer::new(cfg.buffer_capacity)?;
    let mut rec = Recorder::new(cfg, false)?;
    let mut steps = 0u64;
    let mut best: Option<(f64, Checkpoint)> = None;
    info!("training expert on {} for {total} steps", spec.name);
    while steps < total && !rec.stop {
        let episode = {
            let params = &learner.params;
            let actor = if steps < cfg.warm_up {
                Actor::Uniform
            } else {
                Actor::Stochastic(&params.policy)
            };
            let base = steps;
            collect_episode(
                env.as_mut(),
                actor,
                false,
                Some(total - steps),
                &mut rngs.env_reset,
                &mut rngs.policy_noise,
                &mut |k| {
                    let before = rec.rows.len();
                    rec.on_step(base + k, &params.policy, Some(params.alpha()))?;
                    if let Some(row) = rec.rows.get(before) {
                        if best.as_ref().is_none_or(|(b, _)| row.eval_mean > *b) {
                            best = Some((row.eval_mean, Checkpoint::from_sac(params, &spec)));
                        }
                    }
                    Ok(())
                },
            )?
        };
        steps += episode.trajectory.len() as u64;
        let ts = episode.trajectory.transitions_from(Source::Sample);
        let n = ts.len();
        for (t, r) in ts.into_iter().zip(episode.rewards) {
            buffer.push(RewardedTransition {
                transition: t,
                reward: r,
            })?;
        }
        if steps < cfg.warm_up {
            continue;
        }
        let (mut critic, mut actor) = (0.0, 0.0);
        for _ in 0..n {
            let mb = buffer.sample_minibatch(cfg.minibatch, &mut rngs.minibatch)?;
            let batch = RewardedBatch::uniform(
                mb.iter().map(|r| &r.transition).collect(),
                mb.iter().map(|r| r.reward).collect(),
                1.0,
            )?;
            let s = learner.update(&batch, &mut rngs.policy_noise)?;
            critic += s.critic_loss;
            actor += s.actor_loss;
        }
        rec.interval.add(2, Some(critic / n as f64), n);
        rec.interval.add(3, Some(actor / n as f64), n);
        debug!(
            "expert step {steps}: return {:.3}",
            episode.trajectory.env_return
        );
    }
    let last = Checkpoint::from_sac(&learner.params, &spec);
    Ok(RunOutput {
        checkpoint: best.map_or_else(|| last.clone(), |(_, ck)| ck),
        final_checkpoint: Some(last),
        iterations: Vec::new(),
        rows: rec.rows,
        timing: rec.timing,
        stopped_early: rec.stop,
    })
}

/// Rolls out `n` deterministic episodes of a checkpoint's policy. `seed`
/// fixes the reset sequence.
pub fn record_demos(ck: &Checkpoint, n: usize, seed: u64) -> Result<DemoSet> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "number of demonstrations must be at least 1".into(),
        ));
    }
    let mut env = make_env(&ck.env_spec.name)?;
    if env.spec() != &ck.env_spec {
        return Err(Error::EnvMismatch {
            expected: format!("{} {:?}", env.spec().name, env.spec().constants),
            found: format!("{} {:?}", ck.env_spec.name, ck.env_spec.constants),
        });
    }
    let policy = ck.policy()?;
    let mut resets = stream(seed, Stream::EnvReset);
    let mut unused = stream(seed, Stream::PolicyNoise);
    let trajectories = (0..n)
        .map(|_| {
            collect_episode(
                env.as_mut(),
                Actor::Deterministic(&policy),
                ck.augmented,
                None,
                &mut resets,
                &mut unused,
                &mut |_| Ok(()),
            )
            .map(|e| e.trajectory)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DemoSet {
        meta: DemoMeta {
            env_spec: ck.env_spec.clone(),
            wrapped: false,
            seed,
        },
        trajectories,
    })
}

fn check_demos(cfg: &RunConfig, demos: &DemoSet) -> Result<EnvSpec> {
    let spec = env_spec(cfg.env_name()?)?;
    if demos.meta.env_spec.name != spec.name {
        return Err(Error::EnvMismatch {
            expected: spec.name.clone(),
            found: demos.meta.env_spec.name.clone(),
        });
    }
    if demos.meta.env_spec != spec {
        return Err(Error::EnvMismatch {
            expected: format!("{} {:?}", spec.name, spec.constants),
            found: format!(
                "{} {:?}",
                demos.meta.env_spec.name, demos.meta.env_spec.constants
            ),
        });
    }
    if demos.trajectories.is_empty() {
        return Err(Error::InvalidArgument(
            "demonstration file holds no trajectories".into(),
        ));
    }
    if demos.meta.wrapped && !cfg.absorbing_wrapper {
        return Err(Error::Incompatible(
            "wrapped demonstrations cannot be used with absorbing_wrapper = off".into(),
        ));
    }
    Ok(spec)
}

/// Runs the configured imitation algorithm against `demos`.
pub fn imitate(cfg: &RunConfig, demos: &DemoSet) -> Result<RunOutput> {
    cfg.validate()?;
    let spec = check_demos(cfg, demos)?;
    if cfg.algo == Algo::Bc {
        return behavioral_cloning(cfg, &spec, demos);
    }
    let wrapper = cfg.absorbing_wrapper;
    let mut rngs = RunRngs::new(cfg.seed);
    let params = init_sac(cfg, &spec, wrapper, &mut rngs)?;
    let disc = if cfg.algo == Algo::Dsac {
        let prof = cfg.net_profile()?;
        let hidden_indicator = usize::from(wrapper && !cfg.disc_indicator);
        let d = Discriminator::new(
            params.obs_dim() + spec.act_dim - hidden_indicator,
            &prof.disc_hidden,
            &mut rngs.init,
        )?;
        let mut learner =
            DiscriminatorLearner::new(d, cfg.disc_lr, cfg.gp_coeff, AdamConfig::default());
        if cfg.decay_all_lrs {
            learner.lr_decay = Some((cfg.lr_decay, cfg.lr_decay_interval));
        }
        Some(learner)
    } else {
        None
    };
    let mut agent = ImitationAgent::new(
        SacLearner::new(params, cfg.sac_config()),
        disc,
        cfg.imitation_config(),
        &demos.trajectories,
        cfg.buffer_capacity,
    )?;
    let mut env = make_env(&spec.name)?;
    let mut rec = Recorder::new(cfg, wrapper)?;
    let mut iterations = Vec::new();
    info!(
        "imitating with {} (wrapper {}) for {} steps",
        cfg.algo, wrapper, cfg.total_steps
    );
    while agent.env_steps < cfg.total_steps && !rec.stop {
        let remaining = cfg.total_steps - agent.env_steps;
        let m = dsac_train_iteration(
            &mut agent,
            env.as_mut(),
            &mut rngs,
            Some(remaining),
            &mut |k, p| rec.on_step(k, &p.policy, Some(p.alpha())),
        )?;
        let n = m.updates;
        rec.interval.add(0, m.demo_reward_mean, n);
        rec.interval.add(1, m.samp_reward_mean, n);
        rec.interval.add(2, m.critic_loss, n);
        rec.interval.add(3, m.actor_loss, n);
        rec.interval.add(4, m.disc_loss, n);
        debug!(
            "step {}: return {:.3}, demo r {:?}, samp r {:?}",
            m.env_steps, m.episode_return, m.demo_reward_mean, m.samp_reward_mean
        );
        iterations.push(m);
    }
    Ok(RunOutput {
        checkpoint: Checkpoint::from_sac(&agent.sac.params, &spec),
        final_checkpoint: None,
        iterations,
        rows: rec.rows,
        timing: rec.timing,
        stopped_early: rec.stop,
    })
}

/// Behavioral cloning: `total_steps` gradient steps on demonstration
/// minibatches, evaluated every `eval_interval` gradient steps. The loss is
/// reported in the `actor_loss` column.
fn behavioral_cloning(cfg: &RunConfig, spec: &EnvSpec, demos: &DemoSet) -> Result<RunOutput> {
    let wrapper = cfg.absorbing_wrapper;
    let mut rngs = RunRngs::new(cfg.seed);
    let mut buffer = ReplayBuffer::unbounded();
    for traj in &demos.trajectories {
        let traj = if wrapper {
            wrap_for_absorbing_states(traj)?
        } else {
            traj.clone()
        };
        for t in traj.transitions_from(Source::Demo) {
            buffer.push(t)?;
        }
    }
    let prof = cfg.net_profile()?;
    let policy = GaussianPolicy::new(
        spec.obs_dim + usize::from(wrapper),
        spec.act_dim,
        &prof.policy_hidden,
        &mut rngs.init,
    )?;
    let mut learner = BcLearner::new(policy, cfg.bc_lr, AdamConfig::default());
    let mut rec = Recorder::new(cfg, wrapper)?;
    for step in 1..=cfg.total_steps {
        let mb = buffer.sample_minibatch(cfg.minibatch, &mut rngs.minibatch)?;
        let loss = learner.update(&mb)?;
        rec.interval.add(3, Some(loss), 1);
        rec.on_step(step, &learner.policy, None)?;
        if rec.stop {
            break;
        }
    }
    Ok(RunOutput {
        checkpoint: Checkpoint::from_policy(&learner.policy, spec, wrapper),
        final_checkpoint: None,
        iterations: Vec::new(),
        rows: rec.rows,
        timing: rec.timing,
        stopped_early: rec.stop,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub returns: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl EvalSummary {
    pub fn to_text(&self) -> String {
        format!(
            "episodes = {}\nmean = {}\nstd = {}\nmin = {}\nmax = {}\n",
            self.returns.len(),
            self.mean,
            self.std,
            self.min,
            self.max
        )
    }
}

impl EvalSummary {
    fn from_returns(returns: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&returns);
        let min = returns.iter().copied().fold(f64::INFINITY, f64::min);
        let max = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        EvalSummary {
            returns,
            mean,
            std,
            min,
            max,
        }
    }
}

/// Deterministic rollouts of a checkpoint's policy.
pub fn evaluate(ck: &Checkpoint, episodes: usize, seed: u64) -> Result<EvalSummary> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be at least 1".into()));
    }
    let mut env = make_env(&ck.env_spec.name)?;
    let policy = ck.policy()?;
    let returns = evaluate_policy(
        env.as_mut(),
        &policy,
        episodes,
        ck.augmented,
        &mut stream(seed, Stream::Eval),
    )?;
    Ok(EvalSummary::from_returns(returns))
}

/// Returns of uniformly random actions over the same reset sequence that
/// [`evaluate`] uses for `seed`. Serves as the zero point of normalized
/// scores.
pub fn evaluate_uniform(env_name: &str, episodes: usize, seed: u64) -> Result<EvalSummary> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be at least 1".into()));
    }
    let mut env = make_env(env_name)?;
    let mut resets = stream(seed, Stream::Eval);
    let mut noise = stream(seed, Stream::PolicyNoise);
    let returns = (0..episodes)
        .map(|_| {
            collect_episode(
                env.as_mut(),
                Actor::Uniform,
                false,
                None,
                &mut resets,
                &mut noise,
                &mut |_| Ok(()),
            )
            .map(|e| e.trajectory.env_return)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalSummary::from_returns(returns))
}

/// `(r - uniform) / (expert - uniform)`: 0 at the random baseline, 1 at the
/// expert.
pub fn normalized_score(r: f64, uniform: f64, expert: f64) -> f64 {
    (r - uniform) / (expert - uniform)
}

/// Outcome of a seed sweep.
#[derive(Debug)]
pub struct SweepReport {
    pub completed: Vec<(u64, Vec<MetricsRow>)>,
    pub failed: Vec<(u64, Error)>,
    pub aggregate_path: PathBuf,
}

/// Runs [`imitate`] once per seed in `cfg.seeds`, `jobs` at a time, each
/// into `out/seed_<n>/`, then writes `out/aggregate.csv`. A failing seed
/// does not stop the others.
pub fn sweep(cfg: &RunConfig, demos: &DemoSet, out: &Path, jobs: usize) -> Result<SweepReport> {
    cfg.validate()?;
    check_demos(cfg, demos)?;
    let seeds = cfg.seeds.clone();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(u64, Result<Vec<MetricsRow>>)>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, seeds.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&seed) = seeds.get(i) else { break };
                let mut c = cfg.clone();
                c.seed = seed;
                let dir = out.join(format!("seed_{seed}"));
                let r = imitate(&c, demos).and_then(|o| o.write(&dir, &c).map(|_| o.rows));
                if let Err(e) = &r {
                    warn!("seed {seed} failed: {e}");
                }
                results.lock().expect("no poisoned workers").push((seed, r));
            });
        }
    });
    let mut results = results.into_inner().expect("no poisoned workers");
    results.sort_by_key(|(s, _)| *s);
    let (mut completed, mut failed) = (Vec::new(), Vec::new());
    for (seed, r) in results {
        match r {
            Ok(rows) => completed.push((seed, rows)),
            Err(e) => failed.push((seed, e)),
        }
    }
    let missing: Vec<u64> = failed.iter().map(|(s, _)| *s).collect();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let aggregate_path = out.join("aggregate.csv");
    std::fs::write(&aggregate_path, aggregate_csv(&completed, &missing))
        .map_err(|e| Error::io(&aggregate_path, e))?;
    Ok(SweepReport {
        completed,
        failed,
        aggregate_path,
    })
}

pub const AGGREGATE_HEADER: &str = "step,seed,status,eval_mean,demo_reward_mean,samp_reward_mean";

/// Per-seed rows, then `mean` and `std` rows per step over the seeds that
/// reported it, then one `missing` row per failed seed.
pub fn aggregate_csv(completed: &[(u64, Vec<MetricsRow>)], missing: &[u64]) -> String {
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = format!("{AGGREGATE_HEADER}\n");
    let mut steps: Vec<u64> = completed
        .iter()
        .flat_map(|(_, r)| r.iter().map(|m| m.step))
        .collect();
    steps.sort_unstable();
    steps.dedup();
    for &step in &steps {
        let at: Vec<(u64, &MetricsRow)> = completed
            .iter()
            .filter_map(|(s, rows)| rows.iter().find(|r| r.step == step).map(|r| (*s, r)))
            .collect();
        for (seed, r) in &at {
            let _ = writeln!(
                out,
                "{step},{seed},ok,{},{},{}",
                r.eval_mean,
                cell(r.demo_reward_mean),
                cell(r.samp_reward_mean)
            );
        }
        let stat = |f: &dyn Fn(&MetricsRow) -> Option<f64>| -> (Option<f64>, Option<f64>) {
            let v: Vec<f64> = at.iter().filter_map(|(_, r)| f(r)).collect();
            if v.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&v);
                (Some(m), Some(s))
            }
        };
        let e = stat(&|r| Some(r.eval_mean));
        let d = stat(&|r| r.demo_reward_mean);
        let sm = stat(&|r| r.samp_reward_mean);
        let _ = writeln!(
            out,
            "{step},mean,ok,{},{},{}",
            cell(e.0),
            cell(d.0),
            cell(sm.0)
        );
        let _ = writeln!(
            out,
            "{step},std,ok,{},{},{}",
            cell(e.1),
            cell(d.1),
            cell(sm.1)
        );
    }
    for seed in missing {
        let _ = writeln!(out, ",{seed},missing,,,");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::POINT_GOAL;

    fn tiny(algo: &str) -> RunConfig {
        RunConfig::from_text(&format!(
            "env = {POINT_GOAL}\nalgo = {algo}\nprofile = small\ntotal_steps = 600\nexpert_steps = 600\nwarm_up = 300\n\
             eval_interval = 200\neval_episodes = 2\nminibatch = 16\n"
        ))
        .unwrap()
    }

    #[test]
    fn expert_run_rows_follow_eval_cadence_and_repeat() {
        let cfg = tiny("sqil");
        let a = train_expert(&cfg).unwrap();
        assert_eq!(
            a.rows.iter().map(|r| r.step).collect::<Vec<_>>(),
            vec![200, 400, 600]
        );
        assert!(a.rows[0].critic_loss.is_none());
        assert!(a.rows[2].critic_loss.is_some());
        let b = train_expert(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.checkpoint, b.checkpoint);
    }

    #[test]
    fn record_then_imitate_every_algorithm() {
        let expert = train_expert(&tiny("sqil")).unwrap();
        let demos = record_demos(&expert.checkpoint, 2, 0).unwrap();
        assert_eq!(demos.trajectories.len(), 2);
        assert_eq!(record_demos(&expert.checkpoint, 2, 0).unwrap(), demos);
        assert!(record_demos(&expert.checkpoint, 0, 0).is_err());
        for algo in ["bc", "sqil", "dsac"] {
            let out = imitate(&tiny(algo), &demos).unwrap();
            assert_eq!(out.rows.len(), 3, "{algo}");
            assert!(out.rows.iter().all(|r| r.wall_time_s == 0.0));
        }
        let dsac = imitate(&tiny("dsac"), &demos).unwrap();
        assert!(dsac.rows[2].disc_loss.is_some());
        let mut blind = tiny("dsac");
        blind.disc_indicator = false;
        blind.decay_all_lrs = true;
        blind.critic_clip = Some(10.0);
        let other = imitate(&blind, &demos).unwrap();
        assert!(other.rows[2].disc_loss.is_some());
        assert_ne!(other.rows, dsac.rows);
        let mut cfg = tiny("dsac");
        cfg.env = Some("pendulum_v1".into());
        assert!(matches!(
            imitate(&cfg, &demos),
            Err(Error::EnvMismatch { .. })
        ));
    }

    #[test]
    fn evaluate_is_deterministic() {
        let out = train_expert(&tiny("sqil")).unwrap();
        let a = evaluate(&out.checkpoint, 3, 5).unwrap();
        assert_eq!(a, evaluate(&out.checkpoint, 3, 5).unwrap());
        assert_eq!(a.returns.len(), 3);
        assert!(a.min <= a.mean && a.mean <= a.max);
    }

    #[test]
    fn aggregate_marks_missing_seeds() {
        let row = |step, v| MetricsRow {
            step,
            eval_mean: v,
            ..MetricsRow::default()
        };
        let text = aggregate_csv(&[(1, vec![row(5, 1.0)]), (2, vec![row(5, 3.0)])], &[3]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[3], "5,mean,ok,2,,");
        assert_eq!(lines[4], "5,std,ok,1,,");
        assert_eq!(lines[5], ",3,missing,,,");
    }
}
