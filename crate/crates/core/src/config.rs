//! Complete run configuration with dotted-key overrides.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::{ContactMaterial, World};
use crate::env::{DeckVelocityEnv, EnvConfig, Environment, SkateEnv, ToyConfig};
use crate::error::{Error, Result};
use crate::gait::GaitSchedule;
use crate::learn::{Task, TrainConfig};
use crate::model::ModelParams;
use crate::rewards::RewardConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub contact: ContactMaterial,
    pub env: EnvConfig,
    pub reward: RewardConfig,
    pub gait: GaitSchedule,
    pub toy: ToyConfig,
    pub train: TrainConfig,
}

fn config_error(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_error("config", e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Applies `dotted.key=value`. The value is parsed as JSON and taken as a
    /// plain string when that fails. The key must already exist.
    pub fn apply_override(&mut self, entry: &str) -> Result<()> {
        let (key, raw) = entry
            .split_once('=')
            .ok_or_else(|| config_error(entry, "override must have the form key=value"))?;
        let key = key.trim();
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut root = serde_json::to_value(&*self)?;
        let mut node = &mut root;
        for part in key.split('.') {
            node = node
                .as_object_mut()
                .and_then(|m| m.get_mut(part))
                .ok_or_else(|| config_error(key, "unknown configuration key"))?;
        }
        *node = value;
        *self = serde_json::from_value(root).map_err(|e| config_error(key, e.to_string()))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let named = |e: Error| match e {
            Error::InvalidParameter { field, reason } => Error::Config { field, reason },
            other => other,
        };
        self.model.validate().map_err(named)?;
        self.contact.validate().map_err(named)?;
        self.env.validate().map_err(named)?;
        self.reward.validate().map_err(named)?;
        self.gait.validate().map_err(named)?;
        self.toy.validate().map_err(named)?;
        self.train.validate().map_err(named)?;
        Ok(())
    }

    pub fn world(&self) -> Result<Arc<World>> {
        let w = match self.train.task {
            Task::Skate => World::new(self.model.clone(), self.contact)?,
            Task::DeckVelocity => World::board_only(self.model.clone(), self.contact)?,
        };
        Ok(Arc::new(w))
    }

    pub fn skate_env(&self) -> Result<SkateEnv> {
        let world = Arc::new(World::new(self.model.clone(), self.contact)?);
        SkateEnv::new(world, self.env.clone(), self.reward, self.gait)
    }

    /// `n` environments of the configured task sharing one world.
    pub fn build_envs(&self, n: usize) -> Result<Vec<Box<dyn Environment>>> {
        let world = self.world()?;
        let mut out: Vec<Box<dyn Environment>> = Vec::with_capacity(n);
        match self.train.task {
            Task::Skate => {
                let proto = SkateEnv::new(world, self.env.clone(), self.reward, self.gait)?;
                out.extend((0..n).map(|_| Box::new(proto.clone()) as Box<dyn Environment>));
            }
            Task::DeckVelocity => {
                let proto = DeckVelocityEnv::new(world, self.toy.clone())?;
                out.extend((0..n).map(|_| Box::new(proto.clone()) as Box<dyn Environment>));
            }
        }
        Ok(out)
    }
}
