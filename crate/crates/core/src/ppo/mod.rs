//! Proximal policy optimization for the swarm environment, written against
//! plain `Vec<f64>` tensors.

pub mod adam;
pub mod buffer;
pub mod net;
pub mod trainer;
pub mod update;

use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use buffer::{compute_advantages, RolloutBuffer, Sample};
pub use net::{Checkpoint, PolicyNet, Shape};
pub use trainer::{act, evaluate, moving_average, EpisodeRecord, EvalEpisode, Trainer};
pub use update::{loss_and_grad, ppo_update, LossStats, LossWeights, UpdateStats};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    /// Steps collected per update (`M`).
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub clip_range: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    /// Initial exploration level. PPO explores through its stochastic
    /// policy; this value only scales the entropy bonus.
    pub exploration: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Global gradient-norm cap; 0 disables clipping.
    pub max_grad_norm: f64,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            learning_rate: 2.5e-4,
            batch_size: 512,
            minibatch_size: 128,
            clip_range: 0.2,
            gae_lambda: 0.95,
            epochs: 4,
            exploration: 1.0,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            hidden: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("gamma and gae_lambda must lie in [0, 1]"));
        }
        if !(self.learning_rate > 0.0) || !(self.clip_range > 0.0) {
            return Err(Error::config("learning rate and clip range must be positive"));
        }
        if self.batch_size == 0 || self.minibatch_size == 0 || self.epochs == 0 || self.hidden == 0 {
            return Err(Error::config("batch, minibatch, epochs and hidden width must be >= 1"));
        }
        if self.exploration < 0.0 || self.value_coef < 0.0 || self.entropy_coef < 0.0 || self.max_grad_norm < 0.0 {
            return Err(Error::config("coefficients must be non-negative"));
        }
        Ok(())
    }
}
