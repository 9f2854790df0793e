//! Batched data collection across a pool of environments.

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use super::policy::{log_prob, Policy};
use crate::env::{EnvRng, Environment};
use crate::rewards::TERM_NAMES;

/// Transitions in time-major order: entry `(t, e)` is at `t * n_envs + e`,
/// vector-valued fields are rows of that index.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub n_envs: usize,
    pub horizon: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    /// Normalized observations the actions were drawn from.
    pub obs: Vec<f64>,
    /// Raw observations, for the normalizer update.
    pub raw_obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Successor-state value where the stream is cut; see `gae`.
    pub bootstrap: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.n_envs * self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn raw_obs_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.raw_obs.chunks_exact(self.obs_dim)
    }

    /// Digest over every field's exact bit pattern.
    pub fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        (self.n_envs, self.horizon, self.obs_dim, self.act_dim).hash(&mut h);
        for v in [
            &self.obs,
            &self.raw_obs,
            &self.actions,
            &self.log_probs,
            &self.rewards,
            &self.values,
            &self.bootstrap,
        ] {
            for x in v.iter() {
                x.to_bits().hash(&mut h);
            }
        }
        self.dones.hash(&mut h);
        h.finish()
    }
}

/// One finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub env: usize,
    pub ret: f64,
    pub length: usize,
    pub mean_tracking_error: f64,
    pub termination: &'static str,
}

/// Per-rollout aggregates, in environment order.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStats {
    pub episodes: Vec<EpisodeRecord>,
    /// Sums of unweighted reward terms over steps that reported them.
    pub term_sums: [f64; TERM_NAMES.len()],
    pub term_steps: usize,
    pub tracking_sum: f64,
    pub steps: usize,
}

impl RolloutStats {
    fn empty() -> Self {
        Self {
            episodes: Vec::new(),
            term_sums: [0.0; TERM_NAMES.len()],
            term_steps: 0,
            tracking_sum: 0.0,
            steps: 0,
        }
    }
}

struct Slot {
    env: Box<dyn Environment>,
    rng: EnvRng,
    obs: Vec<f64>,
    ep_return: f64,
    ep_len: usize,
    ep_tracking: f64,
}

#[derive(Default)]
struct SlotOut {
    obs: Vec<f64>,
    raw_obs: Vec<f64>,
    actions: Vec<f64>,
    log_probs: Vec<f64>,
    rewards: Vec<f64>,
    values: Vec<f64>,
    dones: Vec<bool>,
    bootstrap: Vec<f64>,
    episodes: Vec<EpisodeRecord>,
    term_sums: [f64; TERM_NAMES.len()],
    term_steps: usize,
    tracking_sum: f64,
}

/// Independent random stream for environment `index`.
pub fn env_rng(seed: u64, index: usize) -> EnvRng {
    let mut rng = EnvRng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Owns the environments and their random streams. Each environment draws
/// its action noise and reset randomness only from its own stream, so the
/// batch does not depend on how environments are spread over workers.
pub struct Collector {
    slots: Vec<Slot>,
    threads: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Collector {
    pub fn new(envs: Vec<Box<dyn Environment>>, seed: u64, threads: usize) -> Self {
        let slots = envs
            .into_iter()
            .enumerate()
            .map(|(i, mut env)| {
                let mut rng = env_rng(seed, i);
                let obs = env.reset(&mut rng);
                Slot {
                    env,
                    rng,
                    obs,
                    ep_return: 0.0,
                    ep_len: 0,
                    ep_tracking: 0.0,
                }
            })
            .collect();
        let threads = threads.max(1);
        Self {
            slots,
            threads,
            #[cfg(feature = "parallel")]
            pool: (threads > 1).then(|| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .expect("worker pool")
            }),
        }
    }

    pub fn n_envs(&self) -> usize {
        self.slots.len()
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Current raw observation of every environment.
    pub fn observations(&self) -> Vec<Vec<f64>> {
        self.slots.iter().map(|s| s.obs.clone()).collect()
    }

    /// Steps every environment `horizon` times with actions sampled from
    /// `policy`, resetting finished episodes in place.
    pub fn rollout(&mut self, policy: &Policy, horizon: usize) -> (Batch, RolloutStats) {
        let outs = self.run_slots(policy, horizon);
        assemble(outs, horizon, policy.obs_dim(), policy.act_dim())
    }

    #[cfg(feature = "parallel")]
    fn run_slots(&mut self, policy: &Policy, horizon: usize) -> Vec<SlotOut> {
        use rayon::prelude::*;
        match &self.pool {
            Some(pool) => {
                let slots = &mut self.slots;
                pool.install(|| {
                    slots
                        .par_iter_mut()
                        .enumerate()
                        .map(|(i, s)| run_slot(i, s, policy, horizon))
                        .collect()
                })
            }
            None => self.run_sequential(policy, horizon),
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn run_slots(&mut self, policy: &Policy, horizon: usize) -> Vec<SlotOut> {
        self.run_sequential(policy, horizon)
    }

    fn run_sequential(&mut self, policy: &Policy, horizon: usize) -> Vec<SlotOut> {
        self.slots
            .iter_mut()
            .enumerate()
            .map(|(i, s)| run_slot(i, s, policy, horizon))
            .collect()
    }
}

/// Draws `u = mean + std * eps` with `eps` from `rng`.
pub fn sample_action(policy: &Policy, mean: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    mean.iter()
        .zip(&policy.log_std)
        .map(|(m, s)| {
            let eps: f64 = rng.sample(StandardNormal);
            m + s.exp() * eps
        })
        .collect()
}

fn run_slot(index: usize, s: &mut Slot, policy: &Policy, horizon: usize) -> SlotOut {
    let mut out = SlotOut::default();
    for t in 0..horizon {
        let obs_n = policy.obs_norm.normalize(&s.obs);
        let mean = policy.mean(&obs_n);
        let value = policy.value(&obs_n);
        let u = sample_action(policy, &mean, &mut s.rng);
        let lp = log_prob(&mean, &policy.log_std, &u);
        let step = s.env.step(&u);

        out.raw_obs.extend_from_slice(&s.obs);
        out.obs.extend_from_slice(&obs_n);
        out.actions.extend_from_slice(&u);
        out.log_probs.push(lp);
        out.rewards.push(step.reward);
        out.values.push(value);
        out.dones.push(step.done.is_some());
        if let Some(b) = &step.breakdown {
            for (acc, x) in out.term_sums.iter_mut().zip(&b.terms) {
                *acc += x;
            }
            out.term_steps += 1;
        }
        out.tracking_sum += step.tracking_error;
        s.ep_return += step.reward;
        s.ep_len += 1;
        s.ep_tracking += step.tracking_error;

        let successor = |obs: &[f64]| policy.value(&policy.obs_norm.normalize(obs));
        match step.done {
            Some(reason) => {
                out.bootstrap.push(if reason.is_truncation() { successor(&step.obs) } else { 0.0 });
                out.episodes.push(EpisodeRecord {
                    env: index,
                    ret: s.ep_return,
                    length: s.ep_len,
                    mean_tracking_error: s.ep_tracking / s.ep_len as f64,
                    termination: reason.as_str(),
                });
                s.ep_return = 0.0;
                s.ep_len = 0;
                s.ep_tracking = 0.0;
                s.obs = s.env.reset(&mut s.rng);
            }
            None => {
                out.bootstrap.push(if t + 1 == horizon { successor(&step.obs) } else { 0.0 });
                s.obs = step.obs;
            }
        }
    }
    out
}

fn assemble(outs: Vec<SlotOut>, horizon: usize, obs_dim: usize, act_dim: usize) -> (Batch, RolloutStats) {
    let n_envs = outs.len();
    let n = n_envs * horizon;
    let mut b = Batch {
        n_envs,
        horizon,
        obs_dim,
        act_dim,
        obs: Vec::with_capacity(n * obs_dim),
        raw_obs: Vec::with_capacity(n * obs_dim),
        actions: Vec::with_capacity(n * act_dim),
        log_probs: Vec::with_capacity(n),
        rewards: Vec::with_capacity(n),
        values: Vec::with_capacity(n),
        dones: Vec::with_capacity(n),
        bootstrap: Vec::with_capacity(n),
    };
    for t in 0..horizon {
        for o in &outs {
            b.obs.extend_from_slice(&o.obs[t * obs_dim..(t + 1) * obs_dim]);
            b.raw_obs.extend_from_slice(&o.raw_obs[t * obs_dim..(t + 1) * obs_dim]);
            b.actions.extend_from_slice(&o.actions[t * act_dim..(t + 1) * act_dim]);
            b.log_probs.push(o.log_probs[t]);
            b.rewards.push(o.rewards[t]);
            b.values.push(o.values[t]);
            b.dones.push(o.dones[t]);
            b.bootstrap.push(o.bootstrap[t]);
        }
    }
    let mut stats = RolloutStats::empty();
    stats.steps = n;
    for o in outs {
        stats.episodes.extend(o.episodes);
        for (acc, x) in stats.term_sums.iter_mut().zip(&o.term_sums) {
            *acc += x;
        }
        stats.term_steps += o.term_steps;
        stats.tracking_sum += o.tracking_sum;
    }
    (b, stats)
}
