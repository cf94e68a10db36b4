use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mapset::MapKind;
use super::HarnessError;
use crate::dense_net::Activation;
use crate::grid_world::EnvConfig;
use crate::qmix::{LearnerConfig, MixerMode};

/// Training run configuration. Loaded from JSON; every field except the
/// environment block has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Environment parameters; `seed` doubles as the run seed.
    #[serde(flatten)]
    pub env: EnvConfig,
    #[serde(default = "defaults::mode")]
    pub mode: MixerMode,
    #[serde(default = "defaults::total_steps")]
    pub total_steps: u64,
    #[serde(default = "defaults::eval_interval")]
    pub eval_interval: u64,
    /// Fixed evaluation map set. When absent, one is generated from
    /// `eval_kind`, `eval_count` and `eval_seed`.
    #[serde(default)]
    pub eval_maps: Option<PathBuf>,
    #[serde(default = "defaults::kind")]
    pub eval_kind: MapKind,
    #[serde(default = "defaults::eval_count")]
    pub eval_count: usize,
    #[serde(default = "defaults::eval_seed")]
    pub eval_seed: u64,
    #[serde(default = "defaults::one")]
    pub eval_repeats: usize,
    /// Distribution of training episodes.
    #[serde(default = "defaults::kind")]
    pub train_kind: MapKind,
    /// Size of the pre-generated training pool for give-way maps.
    #[serde(default = "defaults::giveway_pool")]
    pub giveway_pool: usize,
    #[serde(default = "defaults::n_envs")]
    pub n_envs: usize,
    #[serde(default = "defaults::buffer_capacity")]
    pub buffer_capacity: usize,
    #[serde(default = "defaults::learn_start")]
    pub learn_start: usize,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    /// Environment steps per learner update.
    #[serde(default = "defaults::n_envs")]
    pub train_every: usize,
    #[serde(default = "defaults::target_sync")]
    pub target_sync: u64,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    #[serde(default = "defaults::grad_clip")]
    pub grad_clip: f64,
    #[serde(default = "defaults::embed_dim")]
    pub embed_dim: usize,
    #[serde(default = "defaults::hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "defaults::eps_start")]
    pub eps_start: f64,
    #[serde(default = "defaults::eps_end")]
    pub eps_end: f64,
    /// Fraction of `total_steps` over which epsilon decays linearly.
    #[serde(default = "defaults::eps_fraction")]
    pub eps_fraction: f64,
}

mod defaults {
    use super::*;
    pub fn mode() -> MixerMode {
        MixerMode::Qmix
    }
    pub fn total_steps() -> u64 {
        1_500_000
    }
    pub fn eval_interval() -> u64 {
        100_000
    }
    pub fn kind() -> MapKind {
        MapKind::Random
    }
    pub fn eval_count() -> usize {
        200
    }
    pub fn eval_seed() -> u64 {
        0x5eed_e7a1
    }
    pub fn one() -> usize {
        1
    }
    pub fn giveway_pool() -> usize {
        2000
    }
    pub fn n_envs() -> usize {
        8
    }
    pub fn buffer_capacity() -> usize {
        100_000
    }
    pub fn learn_start() -> usize {
        1_000
    }
    pub fn batch_size() -> usize {
        64
    }
    pub fn target_sync() -> u64 {
        200
    }
    pub fn gamma() -> f64 {
        0.99
    }
    pub fn lr() -> f64 {
        5e-4
    }
    pub fn grad_clip() -> f64 {
        10.0
    }
    pub fn embed_dim() -> usize {
        32
    }
    pub fn hidden() -> Vec<usize> {
        vec![64, 64]
    }
    pub fn eps_start() -> f64 {
        1.0
    }
    pub fn eps_end() -> f64 {
        0.05
    }
    pub fn eps_fraction() -> f64 {
        0.1
    }
}

impl RunConfig {
    /// Defaults around a given environment.
    pub fn new(env: EnvConfig) -> Self {
        use defaults::*;
        RunConfig {
            env,
            mode: mode(),
            total_steps: total_steps(),
            eval_interval: eval_interval(),
            eval_maps: None,
            eval_kind: kind(),
            eval_count: eval_count(),
            eval_seed: eval_seed(),
            eval_repeats: one(),
            train_kind: kind(),
            giveway_pool: giveway_pool(),
            n_envs: n_envs(),
            buffer_capacity: buffer_capacity(),
            learn_start: learn_start(),
            batch_size: batch_size(),
            train_every: n_envs(),
            target_sync: target_sync(),
            gamma: gamma(),
            lr: lr(),
            grad_clip: grad_clip(),
            embed_dim: embed_dim(),
            hidden: hidden(),
            eps_start: eps_start(),
            eps_end: eps_end(),
            eps_fraction: eps_fraction(),
        }
    }

    /// Parses and validates a JSON config, rejecting unknown keys.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        let known = serde_json::to_value(RunConfig::new(EnvConfig {
            size: 2,
            density: 0.0,
            n_agents: 1,
            obs_radius: 1,
            horizon: 1,
            goal_dist: None,
            seed: 0,
        }))
        .expect("config serializes");
        if let (Some(obj), Some(known)) = (value.as_object(), known.as_object()) {
            if let Some(key) = obj.keys().find(|k| !known.contains_key(*k)) {
                return Err(HarnessError::ConfigInvalid(format!("unknown field `{key}`")));
            }
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::ConfigInvalid(m));
        self.env.validate().map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        if self.eval_interval == 0 {
            return bad("eval_interval must be >= 1".into());
        }
        if self.total_steps > 0 && self.eval_interval > self.total_steps {
            return bad(format!("eval_interval {} exceeds total_steps {}", self.eval_interval, self.total_steps));
        }
        if self.n_envs == 0 || self.batch_size == 0 || self.train_every == 0 || self.target_sync == 0 {
            return bad("n_envs, batch_size, train_every and target_sync must be >= 1".into());
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer_capacity must hold at least one batch".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return bad("epsilon bounds must lie in [0, 1]".into());
        }
        if !(self.eps_fraction > 0.0 && self.eps_fraction <= 1.0) {
            return bad("eps_fraction must lie in (0, 1]".into());
        }
        if self.eval_count == 0 || self.eval_repeats == 0 {
            return bad("eval_count and eval_repeats must be >= 1".into());
        }
        if self.train_kind == MapKind::Giveway && self.env.n_agents != 2 {
            return bad("give-way maps are two-agent".into());
        }
        Ok(())
    }

    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            mode: self.mode,
            n_agents: self.env.n_agents,
            obs_radius: self.env.obs_radius,
            state_len: self.env.state_len(),
            hidden: self.hidden.clone(),
            embed_dim: self.embed_dim,
            gamma: self.gamma,
            lr: self.lr,
            grad_clip: self.grad_clip,
            mixer_activation: Activation::Elu,
        }
    }

    /// Exploration rate after `steps` environment steps.
    pub fn epsilon(&self, steps: u64) -> f64 {
        let horizon = (self.eps_fraction * self.total_steps as f64).max(1.0);
        let frac = (steps as f64 / horizon).min(1.0);
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}
