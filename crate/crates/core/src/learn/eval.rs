//! Deterministic-policy evaluation on the skateboarding task.

use serde::{Deserialize, Serialize};

use super::policy::Policy;
use super::rollout::env_rng;
use crate::config::RunConfig;
use crate::env::{Environment, TrajectoryFrame};
use crate::error::Result;
use crate::rewards::Command;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub length: usize,
    pub ret: f64,
    pub tracking_error: f64,
    pub phase_adherence: f64,
    pub termination: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub command_vx: f64,
    pub n_episodes: usize,
    /// Mean absolute deck forward-velocity error over all steps, m/s.
    pub mean_tracking_error: Option<f64>,
    pub mean_episode_length: Option<f64>,
    /// Fraction of steps whose left-foot contact equals the rounded
    /// expected contact.
    pub phase_adherence: Option<f64>,
    /// Root mean square of the deck-to-foot horizontal velocity mismatch, m/s.
    pub foot_slip_rms: Option<f64>,
    pub episodes: Vec<EpisodeSummary>,
}

/// Runs `n_episodes` with mean actions at a fixed forward command. Every
/// frame, including the reset frame, is passed to `on_frame`.
pub fn evaluate(
    run: &RunConfig,
    policy: &Policy,
    n_episodes: usize,
    command_vx: f64,
    seed: u64,
    mut on_frame: impl FnMut(usize, &TrajectoryFrame) -> Result<()>,
) -> Result<EvalReport> {
    Command::forward(command_vx).validate()?;
    let mut env = run.skate_env()?;
    policy.check_compatible(env.obs_dim(), env.act_dim())?;
    let f_min = run.reward.f_min;
    let mut episodes = Vec::with_capacity(n_episodes);
    let (mut steps, mut track, mut adhere, mut slip) = (0usize, 0.0, 0usize, 0.0);
    for ep in 0..n_episodes {
        let mut rng = env_rng(seed, ep);
        let mut obs = env.reset_with_command(&mut rng, Some(Command::forward(command_vx)));
        on_frame(ep, &env.frame())?;
        let mut s = EpisodeSummary {
            episode: ep,
            length: 0,
            ret: 0.0,
            tracking_error: 0.0,
            phase_adherence: 0.0,
            termination: None,
        };
        let mut ep_adhere = 0usize;
        loop {
            let action = policy.mean(&policy.obs_norm.normalize(&obs));
            let step = env.step(&action);
            let frame = env.frame();
            on_frame(ep, &frame)?;
            let loaded = frame.signals.foot_force[0] > f_min;
            if loaded == (frame.expected_contact[0] >= 0.5) {
                ep_adhere += 1;
            }
            let d = [
                frame.signals.v_deck_xy[0] - frame.signals.v_right_xy[0],
                frame.signals.v_deck_xy[1] - frame.signals.v_right_xy[1],
            ];
            slip += d[0] * d[0] + d[1] * d[1];
            s.length += 1;
            s.ret += step.reward;
            s.tracking_error += step.tracking_error;
            obs = step.obs;
            if let Some(t) = step.done {
                s.termination = Some(t.as_str().to_string());
                break;
            }
        }
        steps += s.length;
        track += s.tracking_error;
        adhere += ep_adhere;
        s.tracking_error /= s.length as f64;
        s.phase_adherence = ep_adhere as f64 / s.length as f64;
        episodes.push(s);
    }
    let per_step = |x: f64| (steps > 0).then(|| x / steps as f64);
    Ok(EvalReport {
        command_vx,
        n_episodes,
        mean_tracking_error: per_step(track),
        mean_episode_length: (n_episodes > 0).then(|| steps as f64 / n_episodes as f64),
        phase_adherence: per_step(adhere as f64),
        foot_slip_rms: per_step(slip).map(f64::sqrt),
        episodes,
    })
}
