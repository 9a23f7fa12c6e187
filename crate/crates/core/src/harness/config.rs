//! `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::envs::{env_spec, PENDULUM, POINT_GOAL};
use crate::error::{Error, Result};
use crate::imitation::{Algo, ImitationConfig, ImitationWeights};
use crate::nets::NetProfile;
use crate::sac::SacConfig;

/// Every knob of a run. Unset optional values print as `auto` or `none`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: Option<String>,
    pub algo: Algo,
    pub seed: u64,
    pub total_steps: u64,
    /// Expert training length; `auto` picks a per-environment default.
    pub expert_steps: Option<u64>,
    pub warm_up: u64,
    pub gamma: f64,
    pub tau: f64,
    pub buffer_capacity: usize,
    pub minibatch: usize,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub profile: String,
    pub absorbing_wrapper: bool,
    pub demo_bonus: f64,
    pub lambda_demo: f64,
    pub lambda_samp: f64,
    pub gp_coeff: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    pub disc_lr: f64,
    pub bc_lr: f64,
    pub lr_decay: f64,
    pub lr_decay_interval: u64,
    pub actor_clip: Option<f64>,
    pub critic_clip: Option<f64>,
    /// Decay every learning rate on the actor's schedule, not just the
    /// actor's.
    pub decay_all_lrs: bool,
    /// The discriminator sees the absorbing indicator column when the
    /// wrapper is on.
    pub disc_indicator: bool,
    pub init_alpha: f64,
    /// `auto` means `-dim(A)`.
    pub entropy_target: Option<f64>,
    pub demos: Option<PathBuf>,
    pub seeds: Vec<u64>,
    /// Write measured seconds into the metrics `wall_time_s` column instead
    /// of 0. Timing always goes to the separate timing file.
    pub record_wall_time: bool,
    /// End the run after the first evaluation whose mean return reaches
    /// this value.
    pub stop_at_return: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sac = SacConfig::default();
        RunConfig {
            env: None,
            algo: Algo::Dsac,
            seed: 1,
            total_steps: 50_000,
            expert_steps: None,
            warm_up: 10_000,
            gamma: sac.gamma,
            tau: sac.tau,
            buffer_capacity: 500_000,
            minibatch: 100,
            eval_interval: 5_000,
            eval_episodes: 10,
            profile: "desk".into(),
            absorbing_wrapper: true,
            demo_bonus: 0.01,
            lambda_demo: 1.0,
            lambda_samp: 1.0,
            gp_coeff: 10.0,
            actor_lr: sac.actor_lr,
            critic_lr: sac.critic_lr,
            alpha_lr: sac.alpha_lr,
            disc_lr: 1e-3,
            bc_lr: 1e-3,
            lr_decay: sac.lr_decay,
            lr_decay_interval: sac.lr_decay_interval,
            actor_clip: sac.actor_clip,
            critic_clip: sac.critic_clip,
            decay_all_lrs: sac.decay_all,
            disc_indicator: true,
            init_alpha: 1.0,
            entropy_target: None,
            demos: None,
            seeds: vec![1, 2, 3, 4, 5],
            record_wall_time: false,
            stop_at_return: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse(key, v)?;
    if !x.is_finite() {
        return Err(Error::Config(format!("{key}: must be finite, got `{v}`")));
    }
    Ok(x)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected on or off, got `{v}`"
        ))),
    }
}

fn parse_opt<T>(v: &str, word: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
    if v == word {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

fn show_opt<T: ToString>(v: &Option<T>, word: &str) -> String {
    v.as_ref().map_or_else(|| word.to_string(), T::to_string)
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl RunConfig {
    /// Assigns one key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "env" => self.env = parse_opt(v, "none", |s| Ok(s.to_string()))?,
            "algo" => self.algo = v.parse()?,
            "seed" => self.seed = parse("seed", v)?,
            "total_steps" => self.total_steps = parse("total_steps", v)?,
            "expert_steps" => {
                self.expert_steps = parse_opt(v, "auto", |s| parse("expert_steps", s))?
            }
            "warm_up" => self.warm_up = parse("warm_up", v)?,
            "gamma" => self.gamma = parse_f64("gamma", v)?,
            "tau" => self.tau = parse_f64("tau", v)?,
            "buffer_capacity" => self.buffer_capacity = parse("buffer_capacity", v)?,
            "minibatch" => self.minibatch = parse("minibatch", v)?,
            "eval_interval" => self.eval_interval = parse("eval_interval", v)?,
            "eval_episodes" => self.eval_episodes = parse("eval_episodes", v)?,
            "profile" => self.profile = v.to_string(),
            "absorbing_wrapper" => self.absorbing_wrapper = parse_bool("absorbing_wrapper", v)?,
            "demo_bonus" => self.demo_bonus = parse_f64("demo_bonus", v)?,
            "lambda_demo" => self.lambda_demo = parse_f64("lambda_demo", v)?,
            "lambda_samp" => self.lambda_samp = parse_f64("lambda_samp", v)?,
            "gp_coeff" => self.gp_coeff = parse_f64("gp_coeff", v)?,
            "actor_lr" => self.actor_lr = parse_f64("actor_lr", v)?,
            "critic_lr" => self.critic_lr = parse_f64("critic_lr", v)?,
            "alpha_lr" => self.alpha_lr = parse_f64("alpha_lr", v)?,
            "disc_lr" => self.disc_lr = parse_f64("disc_lr", v)?,
            "bc_lr" => self.bc_lr = parse_f64("bc_lr", v)?,
            "lr_decay" => self.lr_decay = parse_f64("lr_decay", v)?,
            "lr_decay_interval" => self.lr_decay_interval = parse("lr_decay_interval", v)?,
            "actor_clip" => self.actor_clip = parse_opt(v, "none", |s| parse_f64("actor_clip", s))?,
            "critic_clip" => {
                self.critic_clip = parse_opt(v, "none", |s| parse_f64("critic_clip", s))?
            }
            "decay_all_lrs" => self.decay_all_lrs = parse_bool("decay_all_lrs", v)?,
            "disc_indicator" => self.disc_indicator = parse_bool("disc_indicator", v)?,
            "init_alpha" => self.init_alpha = parse_f64("init_alpha", v)?,
            "entropy_target" => {
                self.entropy_target = parse_opt(v, "auto", |s| parse_f64("entropy_target", s))?
            }
            "demos" => self.demos = parse_opt(v, "none", |s| Ok(PathBuf::from(s)))?,
            "seeds" => {
                self.seeds = v
                    .split(',')
                    .map(|s| parse("seeds", s.trim()))
                    .collect::<Result<_>>()?
            }
            "record_wall_time" => self.record_wall_time = parse_bool("record_wall_time", v)?,
            "stop_at_return" => {
                self.stop_at_return = parse_opt(v, "none", |s| parse_f64("stop_at_return", s))?
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the current values. `#` starts
    /// a comment. A key may appear once per text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    n + 1
                ))
            })?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{k}`",
                    n + 1
                )));
            }
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_prefix(&e))))
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{kv}` is not key=value")))?;
        self.set(k, v)
    }

    /// Fully resolved `key = value` text; [`RunConfig::from_text`] reads it
    /// back to an equal config.
    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let demos = self.demos.as_ref().map(|p| p.display().to_string());
        let entries: Vec<(&str, String)> = vec![
            ("env", show_opt(&self.env, "none")),
            ("algo", self.algo.to_string()),
            ("seed", self.seed.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("expert_steps", show_opt(&self.expert_steps, "auto")),
            ("warm_up", self.warm_up.to_string()),
            ("gamma", self.gamma.to_string()),
            ("tau", self.tau.to_string()),
            ("buffer_capacity", self.buffer_capacity.to_string()),
            ("minibatch", self.minibatch.to_string()),
            ("eval_interval", self.eval_interval.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("profile", self.profile.clone()),
            ("absorbing_wrapper", on_off(self.absorbing_wrapper).into()),
            ("demo_bonus", self.demo_bonus.to_string()),
            ("lambda_demo", self.lambda_demo.to_string()),
            ("lambda_samp", self.lambda_samp.to_string()),
            ("gp_coeff", self.gp_coeff.to_string()),
            ("actor_lr", self.actor_lr.to_string()),
            ("critic_lr", self.critic_lr.to_string()),
            ("alpha_lr", self.alpha_lr.to_string()),
            ("disc_lr", self.disc_lr.to_string()),
            ("bc_lr", self.bc_lr.to_string()),
            ("lr_decay", self.lr_decay.to_string()),
            ("lr_decay_interval", self.lr_decay_interval.to_string()),
            ("actor_clip", show_opt(&self.actor_clip, "none")),
            ("critic_clip", show_opt(&self.critic_clip, "none")),
            ("decay_all_lrs", on_off(self.decay_all_lrs).into()),
            ("disc_indicator", on_off(self.disc_indicator).into()),
            ("init_alpha", self.init_alpha.to_string()),
            ("entropy_target", show_opt(&self.entropy_target, "auto")),
            ("demos", show_opt(&demos, "none")),
            ("seeds", seeds.join(",")),
            ("record_wall_time", on_off(self.record_wall_time).into()),
            ("stop_at_return", show_opt(&self.stop_at_return, "none")),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// The environment name; required for every run.
    pub fn env_name(&self) -> Result<&str> {
        self.env
            .as_deref()
            .ok_or_else(|| Error::Config("missing required key: env".into()))
    }

    pub fn net_profile(&self) -> Result<NetProfile> {
        NetProfile::by_name(&self.profile)
    }

    pub fn expert_steps_resolved(&self) -> Result<u64> {
        Ok(match (self.expert_steps, self.env_name()?) {
            (Some(n), _) => n,
            (None, PENDULUM) => 150_000,
            (None, POINT_GOAL) => 100_000,
            (None, _) => 100_000,
        })
    }

    /// Checks every field, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        env_spec(self.env_name()?)?;
        self.net_profile()?;
        let positive_ints = [
            ("total_steps", self.total_steps),
            ("buffer_capacity", self.buffer_capacity as u64),
            ("minibatch", self.minibatch as u64),
            ("eval_interval", self.eval_interval),
            ("eval_episodes", self.eval_episodes as u64),
            ("lr_decay_interval", self.lr_decay_interval),
        ];
        for (k, v) in positive_ints {
            if v == 0 {
                return Err(Error::Config(format!("{k}: must be positive")));
            }
        }
        if self.expert_steps == Some(0) {
            return Err(Error::Config("expert_steps: must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma: must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!(
                "tau: must lie in [0, 1], got {}",
                self.tau
            )));
        }
        let positive = [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("alpha_lr", self.alpha_lr),
            ("disc_lr", self.disc_lr),
            ("bc_lr", self.bc_lr),
            ("lr_decay", self.lr_decay),
            ("init_alpha", self.init_alpha),
            ("lambda_demo", self.lambda_demo),
            ("lambda_samp", self.lambda_samp),
        ];
        for (k, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{k}: must be positive, got {v}")));
            }
        }
        for (k, v) in [("demo_bonus", self.demo_bonus), ("gp_coeff", self.gp_coeff)] {
            if v < 0.0 {
                return Err(Error::Config(format!("{k}: must be >= 0, got {v}")));
            }
        }
        for (k, c) in [
            ("actor_clip", self.actor_clip),
            ("critic_clip", self.critic_clip),
        ] {
            if let Some(c) = c {
                if !(c > 0.0) {
                    return Err(Error::Config(format!("{k}: must be positive, got {c}")));
                }
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: must list at least one seed".into()));
        }
        Ok(())
    }

    pub fn sac_config(&self) -> SacConfig {
        SacConfig {
            gamma: self.gamma,
            tau: self.tau,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            alpha_lr: self.alpha_lr,
            lr_decay: self.lr_decay,
            lr_decay_interval: self.lr_decay_interval,
            actor_clip: self.actor_clip,
            critic_clip: self.critic_clip,
            decay_all: self.decay_all_lrs,
            ..SacConfig::default()
        }
    }

    pub fn imitation_config(&self) -> ImitationConfig {
        ImitationConfig {
            algo: self.algo,
            absorbing_wrapper: self.absorbing_wrapper,
            demo_bonus: self.demo_bonus,
            weights: ImitationWeights {
                lambda_demo: self.lambda_demo,
                lambda_samp: self.lambda_samp,
            },
            gp_coeff: self.gp_coeff,
            minibatch: self.minibatch,
            warm_up: self.warm_up,
        }
    }
}

fn strip_prefix(e: &Error) -> String {
    let s = e.to_string();
    s.strip_prefix("config error: ")
        .map(str::to_string)
        .unwrap_or(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_mirror_the_reference_hyperparameters() {
        let c = RunConfig::default();
        assert_eq!(c.gamma, 0.99);
        assert_eq!(c.buffer_capacity, 500_000);
        assert_eq!(c.tau, 5e-3);
        assert_eq!(c.minibatch, 100);
        assert_eq!(c.warm_up, 10_000);
        assert_eq!(c.eval_interval, 5_000);
        assert_eq!(c.eval_episodes, 10);
        assert_eq!(c.total_steps, 50_000);
        assert_eq!(c.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(c.demo_bonus, 0.01);
        assert_eq!(c.gp_coeff, 10.0);
        assert_eq!(c.actor_clip, Some(40.0));
    }

    #[test]
    fn parses_comments_and_rejects_unknown_keys() {
        let c = RunConfig::from_text(
            "# run\nenv = point_goal_v1  # trailing\n\nalgo=sqil\nabsorbing_wrapper = off\n",
        )
        .unwrap();
        assert_eq!(c.env.as_deref(), Some("point_goal_v1"));
        assert_eq!(c.algo, Algo::Sqil);
        assert!(!c.absorbing_wrapper);
        let e = RunConfig::from_text("env = point_goal_v1\ngama = 0.9\n").unwrap_err();
        assert!(
            e.to_string().contains("line 2") && e.to_string().contains("gama"),
            "{e}"
        );
        assert_eq!(e.exit_code(), 2);
        assert!(RunConfig::from_text("seed = 1\nseed = 2\n").is_err());
        assert!(RunConfig::from_text("just words\n").is_err());
        assert!(RunConfig::from_text("gamma = nan\n").is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let e = RunConfig::default().validate().unwrap_err();
        assert!(e.to_string().contains("env"), "{e}");
        let mut c = RunConfig::from_text("env = point_goal_v1").unwrap();
        c.validate().unwrap();
        c.gamma = 1.0;
        assert!(c.validate().unwrap_err().to_string().contains("gamma"));
        let mut c = RunConfig::from_text("env = point_goal_v1\nprofile = huge").unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("profile"));
        c.profile = "small".into();
        c.minibatch = 0;
        assert!(c.validate().unwrap_err().to_string().contains("minibatch"));
        assert!(RunConfig::from_text("env = cartpole")
            .unwrap()
            .validate()
            .is_err());
    }

    #[test]
    fn overrides() {
        let mut c = RunConfig::default();
        c.apply_override("seeds=3, 4").unwrap();
        c.apply_override("stop_at_return=-12.5").unwrap();
        assert_eq!(c.seeds, vec![3, 4]);
        assert_eq!(c.stop_at_return, Some(-12.5));
        assert!(c.apply_override("seeds").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(
            seed in 0u64..1000,
            gamma in 0.0f64..0.999,
            bonus in 0.0f64..2.0,
            wrapper: bool,
            clip in prop::option::of(0.1f64..100.0),
            stop in prop::option::of(-100.0f64..0.0),
            algo in prop::sample::select(vec![Algo::Bc, Algo::Sqil, Algo::Dsac]),
        ) {
            let c = RunConfig {
                env: Some("pendulum_v1".into()),
                seed,
                gamma,
                demo_bonus: bonus,
                absorbing_wrapper: wrapper,
                actor_clip: clip,
                stop_at_return: stop,
                algo,
                demos: Some("d/demos.json".into()),
                ..RunConfig::default()
            };
            prop_assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
        }
    }
}
