use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use super::network::PolicySpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub policy_clip: f64,
    pub value_clip: f64,
    /// Learning rate at the start of training.
    pub lr_start: f64,
    /// Learning rate at `max_steps`.
    pub lr_end: f64,
    pub n_envs: usize,
    pub batch_size: usize,
    /// Steps collected per environment per update.
    pub rollout_horizon: usize,
    pub epochs_per_update: usize,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    pub adam: AdamConfig,
    /// Total environment steps (summed over envs).
    pub max_steps: u64,
    /// Evaluation cadence in total environment steps.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Step cap for a single evaluation episode.
    pub eval_max_steps: usize,
    pub shared_layers: Vec<usize>,
    pub value_layers: Vec<usize>,
    pub seed: u64,
    /// Rollout worker threads; `Some(1)` is the single-worker mode.
    pub threads: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.995,
            gae_lambda: 0.95,
            entropy_coef: 0.01,
            value_coef: 0.5,
            policy_clip: 0.2,
            value_clip: 0.2,
            lr_start: 2.5e-4,
            lr_end: 0.5e-4,
            n_envs: 24,
            batch_size: 512,
            rollout_horizon: 512,
            epochs_per_update: 10,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            adam: AdamConfig::default(),
            max_steps: 1_000_000,
            eval_interval: 10_000,
            eval_episodes: 1,
            eval_max_steps: 4000,
            shared_layers: vec![300, 600, 600],
            value_layers: vec![600],
            seed: 0,
            threads: None,
        }
    }
}

impl TrainConfig {
    pub fn policy_spec(&self, action_dim: usize) -> PolicySpec {
        PolicySpec::with_hidden(action_dim, self.shared_layers.clone(), self.value_layers.clone())
    }

    pub fn rollout_size(&self) -> usize {
        self.n_envs * self.rollout_horizon
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::param("gamma", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::param("gae_lambda", "must lie in [0, 1]"));
        }
        if !(self.policy_clip > 0.0 && self.value_clip > 0.0) {
            return Err(Error::param("policy_clip", "clip ranges must be > 0"));
        }
        if !(self.lr_start > 0.0 && self.lr_end >= 0.0) {
            return Err(Error::param("lr_start", "learning rates must be positive"));
        }
        if self.n_envs == 0 || self.rollout_horizon == 0 || self.batch_size == 0 {
            return Err(Error::param("n_envs", "n_envs, rollout_horizon and batch_size must be positive"));
        }
        if !self.rollout_size().is_multiple_of(self.batch_size) {
            return Err(Error::param(
                "batch_size",
                format!(
                    "{} does not divide the rollout size {} (n_envs x rollout_horizon)",
                    self.batch_size,
                    self.rollout_size()
                ),
            ));
        }
        if self.epochs_per_update == 0 {
            return Err(Error::param("epochs_per_update", "must be positive"));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(Error::param("max_grad_norm", "must be > 0"));
        }
        if self.eval_interval == 0 || self.eval_max_steps == 0 {
            return Err(Error::param("eval_interval", "must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::param("threads", "must be positive"));
        }
        self.policy_spec(1).validate()
    }
}
