//! Humanoid skateboard-pushing simulator with a parallel PPO trainer.

pub mod config;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod gait;
pub mod learn;
pub mod model;
pub mod rewards;

pub use error::{Error, Result};
