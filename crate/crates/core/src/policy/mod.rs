//! Shared-trunk actor-critic trained with the clipped-surrogate policy
//! gradient over parallel environments.

mod adam;
mod buffer;
mod checkpoint;
mod config;
mod gae;
mod gaussian;
mod network;
mod ppo;
mod train;

pub use adam::{clip_grad_norm, lr_schedule, Adam, AdamConfig};
pub use buffer::{Minibatch, RolloutBuffer, Transition};
pub use checkpoint::{
    checkpoint_file_name, config_hash, latest_checkpoint, Checkpoint, CheckpointHeader, FORMAT_VERSION, MAGIC,
};
pub use config::TrainConfig;
pub use gae::gae;
pub use gaussian::{entropy, log_prob, normal_pdf, sample_action, HALF_LN_2PI};
pub use network::{ForwardCache, PolicyNet, PolicyOutput, PolicySpec, Real};
pub use ppo::{normalize, ppo_loss_and_grad, ppo_update, LossBreakdown, LossCoefficients, UpdateStats};
pub use train::{derive_seed, evaluate, EpisodeReport, Progress, RunLayout, RunSetup, TrainSummary, Trainer};
