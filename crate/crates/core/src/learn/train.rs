//! Rollout/update loop with checkpoints and a JSONL metrics stream.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::gae::gae;
use super::policy::Policy;
use super::ppo::{ppo_update, Adam, UpdateStats};
use super::rollout::{Batch, Collector, RolloutStats};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::rewards::TERM_NAMES;

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const RUN_FILE: &str = "run.json";
pub const LAST_GOOD_FILE: &str = "last_good.bpck";

pub fn checkpoint_name(update: u64) -> String {
    format!("checkpoint_{update:06}.bpck")
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub out_dir: PathBuf,
    /// Rollout workers; 0 or 1 runs sequentially.
    pub threads: usize,
    pub resume: Option<PathBuf>,
}

/// One line of the metrics stream. Wall-clock quantities go to the timing
/// stream so that equal seeds give byte-identical metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub update: u64,
    pub env_steps: u64,
    pub episodes: usize,
    pub mean_return: Option<f64>,
    pub mean_episode_length: Option<f64>,
    pub mean_step_reward: f64,
    /// Mean absolute deck forward-velocity error per step, m/s.
    pub tracking_error: f64,
    /// Mean unweighted reward terms per step; absent for tasks without them.
    pub reward_terms: Option<serde_json::Map<String, serde_json::Value>>,
    pub lr: f64,
    #[serde(flatten)]
    pub losses: UpdateStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Timing {
    update: u64,
    seconds: f64,
    steps_per_sec: f64,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub updates: u64,
    pub env_steps: u64,
    pub final_checkpoint: PathBuf,
    pub metrics: Vec<UpdateMetrics>,
}

fn stream_seed(seed: u64, update: u64) -> u64 {
    seed ^ update.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn update_metrics(update: u64, env_steps: u64, batch: &Batch, stats: &RolloutStats, lr: f64, losses: UpdateStats) -> UpdateMetrics {
    let n_ep = stats.episodes.len();
    let mean = |f: &dyn Fn(&super::rollout::EpisodeRecord) -> f64| {
        (n_ep > 0).then(|| stats.episodes.iter().map(f).sum::<f64>() / n_ep as f64)
    };
    let reward_terms = (stats.term_steps > 0).then(|| {
        TERM_NAMES
            .iter()
            .zip(&stats.term_sums)
            .map(|(k, s)| (k.to_string(), serde_json::json!(s / stats.term_steps as f64)))
            .collect()
    });
    UpdateMetrics {
        update,
        env_steps,
        episodes: n_ep,
        mean_return: mean(&|e| e.ret),
        mean_episode_length: mean(&|e| e.length as f64),
        mean_step_reward: batch.rewards.iter().sum::<f64>() / batch.len() as f64,
        tracking_error: stats.tracking_sum / stats.steps as f64,
        reward_terms,
        lr,
        losses,
    }
}

fn open_stream(path: &Path, append: bool) -> Result<BufWriter<File>> {
    let f = if append {
        OpenOptions::new().create(true).append(true).open(path)?
    } else {
        File::create(path)?
    };
    Ok(BufWriter::new(f))
}

fn write_line<T: Serialize>(w: &mut BufWriter<File>, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Runs training into `opts.out_dir`, writing the resolved configuration,
/// metrics, timing and checkpoints. A non-finite loss stops the run after
/// saving the parameters from before the failed update.
pub fn train(run: &RunConfig, opts: &TrainOptions) -> Result<TrainSummary> {
    run.validate()?;
    let cfg = &run.train;
    std::fs::create_dir_all(&opts.out_dir)?;
    std::fs::write(opts.out_dir.join(RUN_FILE), serde_json::to_string_pretty(run)?)?;

    let envs = run.build_envs(cfg.n_envs)?;
    let (obs_dim, act_dim) = (envs[0].obs_dim(), envs[0].act_dim());
    let nominal = envs[0].nominal_action();

    let (mut policy, mut adam, start, mut env_steps) = match &opts.resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            ck.policy.check_compatible(obs_dim, act_dim)?;
            if ck.task != cfg.task || ck.policy.hidden() != cfg.hidden {
                return Err(Error::Architecture("checkpoint task or hidden layers differ from the config".into()));
            }
            (ck.policy, ck.adam, ck.update, ck.env_steps)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(u64::MAX);
            let p = Policy::new(obs_dim, &cfg.hidden, &nominal, cfg.init_log_std, &mut rng);
            let n = p.n_params();
            (p, Adam::new(n), 0, 0)
        }
    };
    let checkpoint = |policy: &Policy, adam: &Adam, update: u64, steps: u64| Checkpoint {
        task: cfg.task,
        update,
        env_steps: steps,
        seed: cfg.seed,
        policy: policy.clone(),
        adam: adam.clone(),
    };
    if opts.resume.is_none() {
        checkpoint(&policy, &adam, 0, 0).save(opts.out_dir.join(checkpoint_name(0)))?;
    }

    let append = opts.resume.is_some();
    let mut metrics_out = open_stream(&opts.out_dir.join(METRICS_FILE), append)?;
    let mut timing_out = open_stream(&opts.out_dir.join(TIMING_FILE), append)?;
    let n_updates = cfg.n_updates();
    let mut collector = Collector::new(envs, stream_seed(cfg.seed, start), opts.threads);
    let mut history = Vec::new();
    let mut last_path = opts.out_dir.join(checkpoint_name(start));

    for k in start..n_updates {
        let clock = Instant::now();
        let (batch, stats) = collector.rollout(&policy, cfg.horizon);
        let good = (policy.clone(), adam.clone());
        policy.obs_norm.update(batch.raw_obs_rows());
        let (adv, ret) = gae(
            &batch.rewards,
            &batch.values,
            &batch.dones,
            &batch.bootstrap,
            batch.n_envs,
            cfg.gamma,
            cfg.lambda,
        );
        let lr = cfg.lr_at(k, n_updates);
        let mut mb_rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, k));
        mb_rng.set_stream(u64::MAX - 1);
        let losses = match ppo_update(&mut policy, &mut adam, &batch, &adv, &ret, cfg, lr, &mut mb_rng) {
            Ok(l) => l,
            Err(e) => {
                checkpoint(&good.0, &good.1, k, env_steps).save(opts.out_dir.join(LAST_GOOD_FILE))?;
                return Err(match e {
                    Error::TrainingAborted { reason, .. } => Error::TrainingAborted { update: k, reason },
                    other => other,
                });
            }
        };
        env_steps += batch.len() as u64;
        let m = update_metrics(k + 1, env_steps, &batch, &stats, lr, losses);
        write_line(&mut metrics_out, &m)?;
        let seconds = clock.elapsed().as_secs_f64();
        write_line(
            &mut timing_out,
            &Timing {
                update: k + 1,
                seconds,
                steps_per_sec: batch.len() as f64 / seconds.max(1e-12),
            },
        )?;
        history.push(m);
        let periodic = cfg.checkpoint_every > 0 && (k + 1) % cfg.checkpoint_every == 0;
        if periodic || k + 1 == n_updates {
            last_path = opts.out_dir.join(checkpoint_name(k + 1));
            checkpoint(&policy, &adam, k + 1, env_steps).save(&last_path)?;
        }
    }
    Ok(TrainSummary {
        updates: n_updates.max(start),
        env_steps,
        final_checkpoint: last_path,
        metrics: history,
    })
}
