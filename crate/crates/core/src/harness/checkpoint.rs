//! Versioned JSON checkpoints of trained policies (and critics).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diff::{ParamDoc, ParamSet};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::nets::{GaussianPolicy, TwinQ};
use crate::sac::SacParams;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub env_spec: EnvSpec,
    /// Policy inputs carry the absorbing indicator.
    pub augmented: bool,
    pub policy_hidden: Vec<usize>,
    /// Empty for policy-only checkpoints.
    pub critic_hidden: Vec<usize>,
    pub entropy_target: Option<f64>,
    pub params: ParamDoc,
}

impl Checkpoint {
    pub fn from_sac(p: &SacParams, env_spec: &EnvSpec) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            env_spec: env_spec.clone(),
            augmented: p.augmented_obs,
            policy_hidden: p.policy.spec.hidden_dims.clone(),
            critic_hidden: p.critics.net.spec.hidden_dims.clone(),
            entropy_target: Some(p.entropy_target),
            params: p.to_param_set().to_doc(),
        }
    }

    pub fn from_policy(policy: &GaussianPolicy, env_spec: &EnvSpec, augmented: bool) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            env_spec: env_spec.clone(),
            augmented,
            policy_hidden: policy.spec.hidden_dims.clone(),
            critic_hidden: vec![],
            entropy_target: None,
            params: policy.params.prefixed("policy/").to_doc(),
        }
    }

    fn obs_dim(&self) -> usize {
        self.env_spec.obs_dim + usize::from(self.augmented)
    }

    /// The policy network.
    pub fn policy(&self) -> Result<GaussianPolicy> {
        let set = ParamSet::from_doc(self.params.clone())?.strip_prefix("policy/");
        let mut p =
            GaussianPolicy::zeroed(self.obs_dim(), self.env_spec.act_dim, &self.policy_hidden)?;
        p.params
            .check_same_layout(&set)
            .map_err(|e| Error::Incompatible(format!("checkpoint policy: {e}")))?;
        p.params = set;
        Ok(p)
    }

    /// Full learner state; fails for policy-only checkpoints.
    pub fn sac_params(&self) -> Result<SacParams> {
        if self.critic_hidden.is_empty() {
            return Err(Error::Incompatible("checkpoint holds no critics".into()));
        }
        let (obs, act) = (self.obs_dim(), self.env_spec.act_dim);
        let critics = TwinQ::zeroed(obs, act, &self.critic_hidden)?;
        let mut p = SacParams {
            policy: GaussianPolicy::zeroed(obs, act, &self.policy_hidden)?,
            target_critics: critics.clone(),
            critics,
            log_alpha: 0.0,
            entropy_target: self.entropy_target.unwrap_or(-(act as f64)),
            augmented_obs: self.augmented,
        };
        p.load_param_set(&ParamSet::from_doc(self.params.clone())?)?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str, path: &Path, expected_env: Option<&str>) -> Result<Self> {
        let corrupt = |reason: String| Error::Corrupt {
            path: path.to_path_buf(),
            reason,
        };
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
        let found = raw
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| corrupt("missing format_version".into()))?;
        if found != u64::from(CHECKPOINT_FORMAT_VERSION) {
            return Err(Error::Version {
                path: path.to_path_buf(),
                found: found as u32,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        let ck: Checkpoint = serde_json::from_value(raw).map_err(|e| corrupt(e.to_string()))?;
        if let Some(env) = expected_env {
            if ck.env_spec.name != env {
                return Err(Error::EnvMismatch {
                    expected: env.to_string(),
                    found: ck.env_spec.name.clone(),
                });
            }
        }
        ck.policy()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, expected_env: Option<&str>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path, expected_env)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{env_spec, PENDULUM, POINT_GOAL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sac_checkpoint_round_trip() {
        let spec = env_spec(POINT_GOAL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = SacParams::new(5, 2, &[8], &[6, 6], 0.7, true, &mut rng).unwrap();
        let ck = Checkpoint::from_sac(&p, &spec);
        let back = Checkpoint::from_json(&ck.to_json(), Path::new("x"), Some(POINT_GOAL)).unwrap();
        assert_eq!(back.sac_params().unwrap(), p);
        assert_eq!(back.policy().unwrap(), p.policy);
    }

    #[test]
    fn errors_are_distinct() {
        let spec = env_spec(PENDULUM).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pol = GaussianPolicy::new(3, 1, &[4], &mut rng).unwrap();
        let ck = Checkpoint::from_policy(&pol, &spec, false);
        let json = ck.to_json();
        let p = Path::new("ck.json");
        assert!(matches!(
            Checkpoint::from_json(&json, p, Some(POINT_GOAL)),
            Err(Error::EnvMismatch { .. })
        ));
        let v2 = json.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(matches!(
            Checkpoint::from_json(&v2, p, None),
            Err(Error::Version { found: 2, .. })
        ));
        assert!(matches!(
            Checkpoint::from_json("{", p, None),
            Err(Error::Corrupt { .. })
        ));
        assert!(matches!(
            Checkpoint::from_json(&ck.to_json(), p, None)
                .unwrap()
                .sac_params(),
            Err(Error::Incompatible(_))
        ));
        let mut bad = ck.clone();
        bad.policy_hidden = vec![5];
        assert!(Checkpoint::from_json(&bad.to_json(), p, None).is_err());
    }
}
