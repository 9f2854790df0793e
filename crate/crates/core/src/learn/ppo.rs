//! Clipped-surrogate policy optimization with an Adam optimizer.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::policy::{entropy, log_prob, Policy, LOG_STD_MAX, LOG_STD_MIN};
use super::rollout::Batch;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * grad[i];
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
        }
    }
}

/// Training samples as row matrices.
#[derive(Debug, Clone)]
pub struct Samples {
    pub obs: DMatrix<f64>,
    pub actions: DMatrix<f64>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Samples {
    /// Rows `idx` of a batch with precomputed advantages and returns.
    pub fn gather(batch: &Batch, adv: &[f64], ret: &[f64], idx: &[usize]) -> Self {
        let (od, ad) = (batch.obs_dim, batch.act_dim);
        Self {
            obs: DMatrix::from_fn(idx.len(), od, |r, c| batch.obs[idx[r] * od + c]),
            actions: DMatrix::from_fn(idx.len(), ad, |r, c| batch.actions[idx[r] * ad + c]),
            old_log_probs: idx.iter().map(|&i| batch.log_probs[i]).collect(),
            advantages: idx.iter().map(|&i| adv[i]).collect(),
            returns: idx.iter().map(|&i| ret[i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_probs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub kl: f64,
    pub clip_fraction: f64,
    pub total: f64,
}

/// Loss terms and the gradient of the total loss in `Policy::flat` order.
pub fn loss_and_grad(policy: &Policy, s: &Samples, cfg: &TrainConfig) -> (LossStats, Vec<f64>) {
    let n = s.len();
    let nf = n as f64;
    let ad = policy.act_dim();
    let na = policy.actor_params.len();
    let nc = policy.critic_params.len();
    let mut grad = vec![0.0; policy.n_params()];

    let tape_a = policy.actor.forward(&policy.actor_params, s.obs.clone());
    let tape_c = policy.critic.forward(&policy.critic_params, s.obs.clone());
    let z = tape_a.output();
    let values = tape_c.output();
    let inv_var: Vec<f64> = policy.log_std.iter().map(|l| (-2.0 * l).exp()).collect();

    let mut d_z = DMatrix::zeros(n, ad);
    let mut d_v = DMatrix::zeros(n, 1);
    let mut d_log_std = vec![0.0; ad];
    let mut stats = LossStats::default();
    let mut mean = vec![0.0; ad];
    let mut u = vec![0.0; ad];
    for r in 0..n {
        for i in 0..ad {
            mean[i] = z[(r, i)].tanh();
            u[i] = s.actions[(r, i)];
        }
        let lp = log_prob(&mean, &policy.log_std, &u);
        let ratio = (lp - s.old_log_probs[r]).exp();
        let a = s.advantages[r];
        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let surr = (ratio * a).min(clipped * a);
        stats.policy_loss -= surr / nf;
        stats.kl += ((ratio - 1.0) - ratio.ln()) / nf;
        if (ratio - 1.0).abs() > cfg.clip {
            stats.clip_fraction += 1.0 / nf;
        }
        let active = ratio * a <= clipped * a;
        let d_lp = if active { -a * ratio / nf } else { 0.0 };
        if d_lp != 0.0 {
            for i in 0..ad {
                let diff = u[i] - mean[i];
                d_z[(r, i)] = d_lp * diff * inv_var[i] * (1.0 - mean[i] * mean[i]);
                d_log_std[i] += d_lp * (diff * diff * inv_var[i] - 1.0);
            }
        }
        let err = values[(r, 0)] - s.returns[r];
        stats.value_loss += 0.5 * err * err / nf;
        d_v[(r, 0)] = cfg.value_coef * err / nf;
    }
    stats.entropy = entropy(&policy.log_std);
    stats.total = stats.policy_loss + cfg.value_coef * stats.value_loss - cfg.entropy_coef * stats.entropy;

    policy.actor.backward(&policy.actor_params, &tape_a, d_z, &mut grad[..na]);
    policy.critic.backward(&policy.critic_params, &tape_c, d_v, &mut grad[na..na + nc]);
    for i in 0..ad {
        grad[na + nc + i] = d_log_std[i] - cfg.entropy_coef;
    }
    (stats, grad)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

/// Epochs of shuffled minibatch steps over one batch. Advantages are
/// normalized over the whole batch. Observation statistics are not touched.
pub fn ppo_update(
    policy: &mut Policy,
    adam: &mut Adam,
    batch: &Batch,
    advantages: &[f64],
    returns: &[f64],
    cfg: &TrainConfig,
    lr: f64,
    rng: &mut impl Rng,
) -> Result<UpdateStats> {
    let mut adv = advantages.to_vec();
    super::gae::normalize(&mut adv);
    let n = batch.len();
    let mb = n.div_ceil(cfg.minibatches);
    let mut order: Vec<usize> = (0..n).collect();
    let mut acc = UpdateStats::default();
    let mut count = 0.0;
    let mut params = policy.flat();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for idx in order.chunks(mb) {
            let samples = Samples::gather(batch, &adv, returns, idx);
            let (stats, mut grad) = loss_and_grad(policy, &samples, cfg);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !stats.total.is_finite() || !norm.is_finite() {
                return Err(Error::TrainingAborted {
                    update: adam.t,
                    reason: format!("non-finite loss {} or gradient norm {}", stats.total, norm),
                });
            }
            if norm > cfg.max_grad_norm {
                let k = cfg.max_grad_norm / norm;
                grad.iter_mut().for_each(|g| *g *= k);
            }
            adam.step(&mut params, &grad, lr);
            let na_nc = policy.actor_params.len() + policy.critic_params.len();
            for l in &mut params[na_nc..] {
                *l = l.clamp(LOG_STD_MIN, LOG_STD_MAX);
            }
            policy.set_flat(&params);

            acc.policy_loss += stats.policy_loss;
            acc.value_loss += stats.value_loss;
            acc.entropy += stats.entropy;
            acc.kl += stats.kl;
            acc.clip_fraction += stats.clip_fraction;
            acc.grad_norm += norm;
            count += 1.0;
        }
    }
    for x in [
        &mut acc.policy_loss,
        &mut acc.value_loss,
        &mut acc.entropy,
        &mut acc.kl,
        &mut acc.clip_fraction,
        &mut acc.grad_norm,
    ] {
        *x /= count;
    }
    Ok(acc)
}
