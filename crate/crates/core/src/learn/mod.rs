//! Batched rollouts and proximal policy optimization.

mod checkpoint;
mod config;
mod eval;
mod gae;
mod mlp;
mod policy;
mod ppo;
mod rollout;
mod train;

pub use checkpoint::{Checkpoint, MAGIC, SCHEMA};
pub use config::{Task, TrainConfig};
pub use eval::{evaluate, EpisodeSummary, EvalReport};
pub use gae::{gae, normalize};
pub use mlp::{Mlp, Tape};
pub use policy::{entropy, log_prob, Policy, RunningNorm, LOG_STD_MAX, LOG_STD_MIN, OBS_CLIP};
pub use ppo::{loss_and_grad, ppo_update, Adam, LossStats, Samples, UpdateStats};
pub use rollout::{env_rng, sample_action, Batch, Collector, EpisodeRecord, RolloutStats};
pub use train::{
    checkpoint_name, train, TrainOptions, TrainSummary, UpdateMetrics, LAST_GOOD_FILE, METRICS_FILE, RUN_FILE,
    TIMING_FILE,
};
