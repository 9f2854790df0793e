//! Binary checkpoint container: magic `BPCK`, schema `u32`, header length
//! `u32`, a JSON header naming every array and its length, then the arrays
//! as little-endian `f32` in header order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Task;
use super::mlp::Mlp;
use super::policy::{Policy, RunningNorm};
use super::ppo::Adam;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BPCK";
pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub task: Task,
    pub update: u64,
    pub env_steps: u64,
    pub seed: u64,
    pub policy: Policy,
    pub adam: Adam,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    task: Task,
    obs_dim: usize,
    act_dim: usize,
    hidden: Vec<usize>,
    update: u64,
    env_steps: u64,
    seed: u64,
    adam_t: u64,
    obs_count: f64,
    arrays: Vec<ArrayInfo>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrayInfo {
    name: String,
    len: usize,
}

fn bad(reason: impl Into<String>) -> Error {
    Error::Checkpoint(reason.into())
}

impl Checkpoint {
    fn arrays(&self) -> [(&'static str, &[f64]); 7] {
        let p = &self.policy;
        [
            ("actor", &p.actor_params),
            ("critic", &p.critic_params),
            ("log_std", &p.log_std),
            ("obs_mean", &p.obs_norm.mean),
            ("obs_var", &p.obs_norm.var),
            ("adam_m", &self.adam.m),
            ("adam_v", &self.adam.v),
        ]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            task: self.task,
            obs_dim: self.policy.obs_dim(),
            act_dim: self.policy.act_dim(),
            hidden: self.policy.hidden(),
            update: self.update,
            env_steps: self.env_steps,
            seed: self.seed,
            adam_t: self.adam.t,
            obs_count: self.policy.obs_norm.count,
            arrays: self
                .arrays()
                .iter()
                .map(|(name, a)| ArrayInfo {
                    name: name.to_string(),
                    len: a.len(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&SCHEMA.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, a) in self.arrays() {
            for x in a {
                out.extend_from_slice(&(*x as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("missing BPCK magic"));
        }
        let schema = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if schema != SCHEMA {
            return Err(bad(format!("unsupported schema {schema}, expected {SCHEMA}")));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| bad(format!("header: {e}")))?;
        let mut pos = 12 + hlen;
        let mut read = |name: &str, len: usize| -> Result<Vec<f64>> {
            let info = header.arrays.iter().find(|a| a.name == name);
            match info {
                Some(a) if a.len == len => {}
                Some(a) => return Err(Error::Architecture(format!("array {name} has {} values, expected {len}", a.len))),
                None => return Err(bad(format!("missing array {name}"))),
            }
            let raw = bytes.get(pos..pos + 4 * len).ok_or_else(|| bad(format!("truncated array {name}")))?;
            pos += 4 * len;
            Ok(raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect())
        };
        let sizes = |out: usize| {
            let mut s = vec![header.obs_dim];
            s.extend_from_slice(&header.hidden);
            s.push(out);
            s
        };
        if header.obs_dim == 0 || header.act_dim == 0 || header.hidden.is_empty() || header.hidden.contains(&0) {
            return Err(bad("degenerate architecture in header"));
        }
        let actor = Mlp::new(sizes(header.act_dim));
        let critic = Mlp::new(sizes(1));
        let n_total = actor.n_params() + critic.n_params() + header.act_dim;
        let actor_params = read("actor", actor.n_params())?;
        let critic_params = read("critic", critic.n_params())?;
        let log_std = read("log_std", header.act_dim)?;
        let mean = read("obs_mean", header.obs_dim)?;
        let var = read("obs_var", header.obs_dim)?;
        let m = read("adam_m", n_total)?;
        let v = read("adam_v", n_total)?;
        if pos != bytes.len() {
            return Err(bad("trailing bytes after arrays"));
        }
        Ok(Self {
            task: header.task,
            update: header.update,
            env_steps: header.env_steps,
            seed: header.seed,
            policy: Policy {
                actor,
                critic,
                actor_params,
                critic_params,
                log_std,
                obs_norm: RunningNorm {
                    mean,
                    var,
                    count: header.obs_count,
                },
            },
            adam: Adam { m, v, t: header.adam_t },
        })
    }

    /// Writes atomically through a temporary sibling file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
