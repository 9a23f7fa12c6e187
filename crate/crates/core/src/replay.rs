//! Transitions, trajectories, FIFO replay buffers and the demonstration file
//! format.
//!
//! Transitions carry no reward. Imitation learners assign rewards at update
//! time from the current reward provider.

use std::collections::VecDeque;
use std::path::Path;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::envs::EnvSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Demo,
    Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub next_obs: Vec<f64>,
    /// 0 only for the final step of an unwrapped, truly terminal episode.
    pub bootstrap_mask: f64,
    pub source: Source,
}

/// One episode stored as a chain: `obs[t]`, `actions[t]`, `obs[t + 1]` form
/// transition `t`, so `obs.len() == actions.len() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub terminal: bool,
    pub truncated: bool,
    /// Undiscounted sum of environment rewards.
    pub env_return: f64,
    /// Observations carry the absorbing indicator (the trajectory has been
    /// through the absorbing-state wrapper).
    pub augmented: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn transitions_from(&self, source: Source) -> Vec<Transition> {
        let n = self.actions.len();
        (0..n)
            .map(|t| {
                let last_terminal = !self.augmented && self.terminal && t + 1 == n;
                Transition {
                    obs: self.obs[t].clone(),
                    action: self.actions[t].clone(),
                    next_obs: self.obs[t + 1].clone(),
                    bootstrap_mask: if last_terminal { 0.0 } else { 1.0 },
                    source,
                }
            })
            .collect()
    }

    /// Transitions tagged as demonstrations.
    pub fn transitions(&self) -> Vec<Transition> {
        self.transitions_from(Source::Demo)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.actions.is_empty() {
            return Err("trajectory has no transitions".into());
        }
        if self.obs.len() != self.actions.len() + 1 {
            return Err(format!(
                "{} observations for {} actions",
                self.obs.len(),
                self.actions.len()
            ));
        }
        if self.terminal && self.truncated {
            return Err("trajectory both terminal and truncated".into());
        }
        let od = self.obs[0].len();
        let ad = self.actions[0].len();
        if self.obs.iter().any(|o| o.len() != od) || self.actions.iter().any(|a| a.len() != ad) {
            return Err("ragged observation or action arrays".into());
        }
        let all_finite = self
            .obs
            .iter()
            .chain(&self.actions)
            .flatten()
            .all(|v| v.is_finite());
        if !all_finite || !self.env_return.is_finite() {
            return Err("non-finite value".into());
        }
        Ok(())
    }
}

/// Anything a [`ReplayBuffer`] can hold; `dims` guards against mixing
/// observation or action layouts in one buffer.
pub trait BufferItem {
    fn dims(&self) -> (usize, usize);
}

impl BufferItem for Transition {
    fn dims(&self) -> (usize, usize) {
        (self.obs.len(), self.action.len())
    }
}

/// Transition paired with its environment reward, for plain RL training.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardedTransition {
    pub transition: Transition,
    pub reward: f64,
}

impl BufferItem for RewardedTransition {
    fn dims(&self) -> (usize, usize) {
        self.transition.dims()
    }
}

/// Bounded FIFO store; the oldest item is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T = Transition> {
    capacity: usize,
    items: VecDeque<T>,
}

impl<T: BufferItem> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument(
                "buffer capacity must be positive".into(),
            ));
        }
        Ok(ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    /// Buffer without an effective size limit.
    pub fn unbounded() -> Self {
        ReplayBuffer {
            capacity: usize::MAX,
            items: VecDeque::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, item: T) -> Result<()> {
        if let Some(first) = self.items.front() {
            if first.dims() != item.dims() {
                return Err(Error::Shape(format!(
                    "buffer holds (obs, action) dims {:?}, pushed {:?}",
                    first.dims(),
                    item.dims()
                )));
            }
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `m` items drawn uniformly with replacement.
    pub fn sample_minibatch(&self, m: usize, rng: &mut dyn RngCore) -> Result<Vec<&T>> {
        if self.items.is_empty() {
            return Err(Error::InvalidArgument(
                "sampling from an empty buffer".into(),
            ));
        }
        if m == 0 {
            return Err(Error::InvalidArgument(
                "minibatch size must be positive".into(),
            ));
        }
        let n = self.items.len();
        Ok((0..m)
            .map(|_| &self.items[rng.random_range(0..n)])
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Demonstration files.

pub const DEMO_FORMAT_VERSION: u32 = 1;

/// Everything a demonstration file records besides the trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoMeta {
    pub env_spec: EnvSpec,
    pub wrapped: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub meta: DemoMeta,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Serialize, Deserialize)]
struct DemoFile {
    format_version: u32,
    env: String,
    env_spec: EnvSpec,
    wrapped: bool,
    seed: u64,
    trajectories: Vec<TrajectoryDoc>,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryDoc {
    obs: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    terminal: bool,
    truncated: bool,
    env_return: f64,
}

pub fn demos_to_json(set: &DemoSet) -> Result<String> {
    if set.trajectories.is_empty() {
        return Err(Error::InvalidArgument(
            "refusing to save an empty demonstration set".into(),
        ));
    }
    for t in &set.trajectories {
        t.validate().map_err(Error::InvalidArgument)?;
        if t.augmented != set.meta.wrapped {
            return Err(Error::InvalidArgument(
                "trajectory wrapping disagrees with the file's wrapped flag".into(),
            ));
        }
    }
    let doc = DemoFile {
        format_version: DEMO_FORMAT_VERSION,
        env: set.meta.env_spec.name.clone(),
        env_spec: set.meta.env_spec.clone(),
        wrapped: set.meta.wrapped,
        seed: set.meta.seed,
        trajectories: set
            .trajectories
            .iter()
            .map(|t| TrajectoryDoc {
                obs: t.obs.clone(),
                actions: t.actions.clone(),
                terminal: t.terminal,
                truncated: t.truncated,
                env_return: t.env_return,
            })
            .collect(),
    };
    Ok(serde_json::to_string(&doc).expect("demo documents always serialize"))
}

pub fn save_demos(set: &DemoSet, path: &Path) -> Result<()> {
    let text = demos_to_json(set)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a demonstration file. With `expected` set, the recorded
/// environment must match it exactly.
pub fn demos_from_json(text: &str, path: &Path, expected: Option<&EnvSpec>) -> Result<DemoSet> {
    let corrupt = |reason: String| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| corrupt("missing format_version".into()))?;
    if version != u64::from(DEMO_FORMAT_VERSION) {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version.min(u64::from(u32::MAX)) as u32,
            expected: DEMO_FORMAT_VERSION,
        });
    }
    let doc: DemoFile = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
    if doc.env != doc.env_spec.name {
        return Err(corrupt(format!(
            "env `{}` disagrees with env_spec name `{}`",
            doc.env, doc.env_spec.name
        )));
    }
    if let Some(want) = expected {
        if want.name != doc.env {
            return Err(Error::EnvMismatch {
                expected: want.name.clone(),
                found: doc.env,
            });
        }
        if *want != doc.env_spec {
            return Err(Error::EnvMismatch {
                expected: format!("{} {:?}", want.name, want.constants),
                found: format!("{} {:?}", doc.env_spec.name, doc.env_spec.constants),
            });
        }
    }
    if doc.trajectories.is_empty() {
        return Err(corrupt("no trajectories".into()));
    }
    let want_obs = doc.env_spec.obs_dim + usize::from(doc.wrapped);
    let mut trajectories = Vec::with_capacity(doc.trajectories.len());
    for (i, t) in doc.trajectories.into_iter().enumerate() {
        let traj = Trajectory {
            obs: t.obs,
            actions: t.actions,
            terminal: t.terminal,
            truncated: t.truncated,
            env_return: t.env_return,
            augmented: doc.wrapped,
        };
        traj.validate()
            .map_err(|r| corrupt(format!("trajectory {i}: {r}")))?;
        if traj.obs[0].len() != want_obs || traj.actions[0].len() != doc.env_spec.act_dim {
            return Err(corrupt(format!(
                "trajectory {i}: dims ({}, {}) do not match env ({want_obs}, {})",
                traj.obs[0].len(),
                traj.actions[0].len(),
                doc.env_spec.act_dim
            )));
        }
        trajectories.push(traj);
    }
    Ok(DemoSet {
        meta: DemoMeta {
            env_spec: doc.env_spec,
            wrapped: doc.wrapped,
            seed: doc.seed,
        },
        trajectories,
    })
}

pub fn load_demos(path: &Path, expected: Option<&EnvSpec>) -> Result<DemoSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    demos_from_json(&text, path, expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{env_spec, PENDULUM, POINT_GOAL};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tagged(i: usize) -> Transition {
        Transition {
            obs: vec![i as f64],
            action: vec![0.0],
            next_obs: vec![i as f64 + 1.0],
            bootstrap_mask: 1.0,
            source: Source::Sample,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(2).unwrap();
        assert!(b.is_empty());
        b.push(tagged(1)).unwrap();
        assert_eq!(b.len(), 1);
        b.push(tagged(2)).unwrap();
        b.push(tagged(3)).unwrap();
        let tags: Vec<f64> = b.iter().map(|t| t.obs[0]).collect();
        assert_eq!(tags, vec![2.0, 3.0]);

        let mut big = ReplayBuffer::new(7).unwrap();
        for i in 0..100 {
            big.push(tagged(i)).unwrap();
            assert!(big.len() <= 7);
        }
        let tags: Vec<f64> = big.iter().map(|t| t.obs[0]).collect();
        assert_eq!(tags, (93..100).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut b = ReplayBuffer::new(4).unwrap();
        b.push(tagged(0)).unwrap();
        let mut odd = tagged(1);
        odd.obs.push(0.0);
        assert!(b.push(odd).is_err());
    }

    #[test]
    fn sampling_with_replacement_and_seeded() {
        let mut one = ReplayBuffer::new(3).unwrap();
        one.push(tagged(9)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = one.sample_minibatch(5, &mut rng).unwrap();
        assert_eq!(batch.len(), 5);
        assert!(batch.iter().all(|t| t.obs[0] == 9.0));

        let mut b = ReplayBuffer::new(50).unwrap();
        for i in 0..50 {
            b.push(tagged(i)).unwrap();
        }
        let draw = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            b.sample_minibatch(20, &mut r)
                .unwrap()
                .iter()
                .map(|t| t.obs[0])
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(4), draw(4));

        let empty: ReplayBuffer = ReplayBuffer::new(3).unwrap();
        assert!(empty.sample_minibatch(1, &mut rng).is_err());
        assert!(b.sample_minibatch(0, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_uniform() {
        // Binomial(n, 1/10) per item: every count within 3 sigma, and the
        // chi-square statistic (9 dof) below the p = 0.001 critical value.
        let mut b = ReplayBuffer::new(10).unwrap();
        for i in 0..10 {
            b.push(tagged(i)).unwrap();
        }
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut counts = [0usize; 10];
        for t in b.sample_minibatch(n, &mut rng).unwrap() {
            counts[t.obs[0] as usize] += 1;
        }
        let mean = n as f64 / 10.0;
        let sigma = (n as f64 * 0.1 * 0.9).sqrt();
        let mut chi2 = 0.0;
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sigma, "{counts:?}");
            chi2 += (c as f64 - mean).powi(2) / mean;
        }
        assert!(chi2 < 27.877, "chi2 = {chi2}");
    }

    fn demo_set(trajectories: Vec<Trajectory>) -> DemoSet {
        DemoSet {
            meta: DemoMeta {
                env_spec: env_spec(POINT_GOAL).unwrap(),
                wrapped: false,
                seed: 0,
            },
            trajectories,
        }
    }

    fn traj_from(values: &[f64], len: usize) -> Trajectory {
        let v = |i: usize| values[i % values.len()];
        Trajectory {
            obs: (0..=len)
                .map(|t| (0..4).map(|k| v(t * 4 + k)).collect())
                .collect(),
            actions: (0..len)
                .map(|t| (0..2).map(|k| v(t * 2 + k + 7)).collect())
                .collect(),
            terminal: len % 2 == 0,
            truncated: len % 2 == 1,
            env_return: v(3) * 10.0,
            augmented: false,
        }
    }

    proptest! {
        #[test]
        fn demo_round_trip_is_lossless(values in prop::collection::vec(-1e6f64..1e6, 1..64), lens in prop::collection::vec(1usize..20, 1..5)) {
            let set = demo_set(lens.iter().map(|&l| traj_from(&values, l)).collect());
            let text = demos_to_json(&set).unwrap();
            let spec = env_spec(POINT_GOAL).unwrap();
            let back = demos_from_json(&text, Path::new("mem"), Some(&spec)).unwrap();
            prop_assert_eq!(back, set);
        }
    }

    #[test]
    fn load_errors_are_distinct() {
        let set = demo_set(vec![traj_from(&[0.1, 0.2, 0.3], 5)]);
        let text = demos_to_json(&set).unwrap();
        let p = Path::new("mem");

        let pend = env_spec(PENDULUM).unwrap();
        assert!(matches!(
            demos_from_json(&text, p, Some(&pend)),
            Err(Error::EnvMismatch { .. })
        ));

        let bumped = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(matches!(
            demos_from_json(&bumped, p, None),
            Err(Error::Version { found: 2, .. })
        ));

        assert!(matches!(
            demos_from_json(&text[..text.len() / 2], p, None),
            Err(Error::Corrupt { .. })
        ));

        let mut altered = env_spec(POINT_GOAL).unwrap();
        altered.constants.insert("damping".into(), 0.9);
        assert!(matches!(
            demos_from_json(&text, p, Some(&altered)),
            Err(Error::EnvMismatch { .. })
        ));
    }

    #[test]
    fn empty_set_is_refused() {
        assert!(matches!(
            demos_to_json(&demo_set(vec![])),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn unwrapped_terminal_gets_zero_mask() {
        let mut t = traj_from(&[0.5], 3);
        t.terminal = true;
        t.truncated = false;
        let tr = t.transitions();
        assert_eq!(
            tr.iter().map(|x| x.bootstrap_mask).collect::<Vec<_>>(),
            vec![1.0, 1.0, 0.0]
        );
        t.terminal = false;
        t.truncated = true;
        assert!(t.transitions().iter().all(|x| x.bootstrap_mask == 1.0));
    }
}
