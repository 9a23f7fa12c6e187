//! Fixture access shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use dsac_core::envs::{env_spec, POINT_GOAL};
use dsac_core::harness::RunConfig;
use dsac_core::imitation::Algo;
use dsac_core::replay::{load_demos, DemoSet};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Frozen point-goal expert reference values.
#[derive(Debug, Clone, Copy)]
pub struct ExpertRef {
    pub expert_mean: f64,
    pub uniform_mean: f64,
    pub expert_floor: f64,
}

impl ExpertRef {
    pub fn load() -> Self {
        let text = std::fs::read_to_string(fixture("point_goal_expert.txt")).unwrap();
        let get = |key: &str| -> f64 {
            text.lines()
                .filter(|l| !l.trim_start().starts_with('#'))
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim().parse().unwrap())
                .unwrap_or_else(|| panic!("fixture lacks {key}"))
        };
        ExpertRef {
            expert_mean: get("expert_mean"),
            uniform_mean: get("uniform_mean"),
            expert_floor: get("expert_floor"),
        }
    }

    /// Return at 90% of the way from the uniform baseline to the expert.
    pub fn threshold(&self) -> f64 {
        self.uniform_mean + 0.9 * (self.expert_mean - self.uniform_mean)
    }
}

pub fn fixture_demos() -> DemoSet {
    load_demos(
        &fixture("point_goal_demos.json"),
        Some(&env_spec(POINT_GOAL).unwrap()),
    )
    .unwrap()
}

/// Point-goal imitation run at the small network profile.
pub fn point_goal_config(algo: Algo, wrapper: bool, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::from_text(&format!("env = {POINT_GOAL}\nprofile = small\n")).unwrap();
    cfg.algo = algo;
    cfg.absorbing_wrapper = wrapper;
    cfg.seed = seed;
    cfg
}
