use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Humanoid pushing the skateboard.
    Skate,
    /// Board-only speed tracking with one push force.
    DeckVelocity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub n_envs: usize,
    /// Environment steps to collect; rounded up to whole updates.
    pub total_steps: u64,
    pub horizon: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub lr: f64,
    pub lr_decay: bool,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Updates between periodic checkpoints; 0 keeps only the final one.
    pub checkpoint_every: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: Task::Skate,
            n_envs: 1024,
            total_steps: 10_000_000,
            horizon: 64,
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatches: 8,
            lr: 3e-4,
            lr_decay: true,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            hidden: vec![256, 256],
            init_log_std: -1.0,
            checkpoint_every: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn steps_per_update(&self) -> u64 {
        (self.n_envs * self.horizon) as u64
    }

    pub fn n_updates(&self) -> u64 {
        self.total_steps.div_ceil(self.steps_per_update())
    }

    /// Learning rate for update `k` of `n`.
    pub fn lr_at(&self, k: u64, n: u64) -> f64 {
        if self.lr_decay && n > 0 {
            self.lr * (1.0 - k as f64 / n as f64)
        } else {
            self.lr
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_envs == 0 {
            return Err(invalid("train.n_envs", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(invalid("train.horizon", "must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid("train.gamma", "must lie in (0, 1]"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(invalid("train.lambda", "must lie in (0, 1]"));
        }
        if !(self.clip.is_finite() && self.clip > 0.0) {
            return Err(invalid("train.clip", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(invalid("train.epochs", "must be at least 1"));
        }
        if self.minibatches == 0 || self.minibatches > self.n_envs * self.horizon {
            return Err(invalid("train.minibatches", "must lie in [1, n_envs * horizon]"));
        }
        for (name, x) in [
            ("train.lr", self.lr),
            ("train.entropy_coef", self.entropy_coef),
            ("train.value_coef", self.value_coef),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(invalid(name, "must be non-negative"));
            }
        }
        if !(self.max_grad_norm.is_finite() && self.max_grad_norm > 0.0) {
            return Err(invalid("train.max_grad_norm", "must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(invalid("train.hidden", "needs at least one non-empty layer"));
        }
        if !self.init_log_std.is_finite() {
            return Err(invalid("train.init_log_std", "must be finite"));
        }
        Ok(())
    }
}
