//! Gaussian actor, value critic and observation normalizer.

use std::f64::consts::PI;

use rand::Rng;

use super::mlp::Mlp;
use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;
/// Normalized observations are clipped to this magnitude.
pub const OBS_CLIP: f64 = 10.0;
const NORM_EPS: f64 = 1e-8;
const MEAN_LIMIT: f64 = 0.999;

/// Running per-dimension mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            count: 0.0,
        }
    }

    /// Merges a batch of samples into the running moments.
    pub fn update<'a>(&mut self, samples: impl IntoIterator<Item = &'a [f64]>) {
        let dim = self.mean.len();
        let mut n = 0.0;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for x in samples {
            n += 1.0;
            for i in 0..dim {
                let d = x[i] - mean[i];
                mean[i] += d / n;
                m2[i] += d * (x[i] - mean[i]);
            }
        }
        if n == 0.0 {
            return;
        }
        if self.count == 0.0 {
            self.mean = mean;
            self.var = m2.iter().map(|m| m / n).collect();
            self.count = n;
            return;
        }
        let total = self.count + n;
        for i in 0..dim {
            let d = mean[i] - self.mean[i];
            let m_a = self.var[i] * self.count;
            let m = m_a + m2[i] + d * d * self.count * n / total;
            self.mean[i] += d * n / total;
            self.var[i] = m / total;
        }
        self.count = total;
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(v, (m, s))| ((v - m) / (s + NORM_EPS).sqrt()).clamp(-OBS_CLIP, OBS_CLIP))
            .collect()
    }

    /// Order-sensitive digest of the statistics.
    pub fn checksum(&self) -> u64 {
        use std::hash::{DefaultHasher, Hash, Hasher};
        let mut h = DefaultHasher::new();
        for x in self.mean.iter().chain(&self.var).chain(std::iter::once(&self.count)) {
            x.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Actor-critic with tanh-squashed action means in normalized units and a
/// state-independent log standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_params: Vec<f64>,
    pub critic_params: Vec<f64>,
    pub log_std: Vec<f64>,
    pub obs_norm: RunningNorm,
}

impl Policy {
    /// Fresh policy whose initial mean action is close to `nominal`.
    pub fn new(obs_dim: usize, hidden: &[usize], nominal: &[f64], init_log_std: f64, rng: &mut impl Rng) -> Self {
        let act_dim = nominal.len();
        let sizes = |out| {
            let mut s = vec![obs_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let actor = Mlp::new(sizes(act_dim));
        let critic = Mlp::new(sizes(1));
        let mut actor_params = actor.init(rng, 0.01);
        let critic_params = critic.init(rng, 1.0);
        let (_, b) = actor.layer_offsets(actor.n_layers() - 1);
        for (k, a) in nominal.iter().enumerate() {
            actor_params[b + k] = a.clamp(-MEAN_LIMIT, MEAN_LIMIT).atanh();
        }
        Self {
            actor,
            critic,
            actor_params,
            critic_params,
            log_std: vec![init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); act_dim],
            obs_norm: RunningNorm::new(obs_dim),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn hidden(&self) -> Vec<usize> {
        let s = self.actor.sizes();
        s[1..s.len() - 1].to_vec()
    }

    pub fn n_params(&self) -> usize {
        self.actor_params.len() + self.critic_params.len() + self.log_std.len()
    }

    /// Mean action for a normalized observation.
    pub fn mean(&self, obs_n: &[f64]) -> Vec<f64> {
        let mut z = self.actor.forward_one(&self.actor_params, obs_n);
        z.iter_mut().for_each(|v| *v = v.tanh());
        z
    }

    pub fn value(&self, obs_n: &[f64]) -> f64 {
        self.critic.forward_one(&self.critic_params, obs_n)[0]
    }

    /// Concatenation of actor, critic and log-std parameters.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.actor_params);
        v.extend_from_slice(&self.critic_params);
        v.extend_from_slice(&self.log_std);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let (na, nc) = (self.actor_params.len(), self.critic_params.len());
        assert_eq!(v.len(), self.n_params());
        self.actor_params.copy_from_slice(&v[..na]);
        self.critic_params.copy_from_slice(&v[na..na + nc]);
        self.log_std.copy_from_slice(&v[na + nc..]);
    }

    pub fn check_compatible(&self, obs_dim: usize, act_dim: usize) -> Result<()> {
        if self.obs_dim() != obs_dim || self.act_dim() != act_dim {
            return Err(Error::Architecture(format!(
                "policy maps {} -> {} but the environment needs {} -> {}",
                self.obs_dim(),
                self.act_dim(),
                obs_dim,
                act_dim
            )));
        }
        Ok(())
    }
}

/// Diagonal Gaussian log density.
pub fn log_prob(mean: &[f64], log_std: &[f64], u: &[f64]) -> f64 {
    let mut lp = 0.0;
    for i in 0..mean.len() {
        let z = (u[i] - mean[i]) * (-log_std[i]).exp();
        lp += -0.5 * z * z - log_std[i] - 0.5 * (2.0 * PI).ln();
    }
    lp
}

/// Differential entropy of the diagonal Gaussian.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| s + 0.5 * (2.0 * PI * std::f64::consts::E).ln()).sum()
}
