//! Reinforcement-learning environments over the simulator.

mod skate;
mod toy;
mod trajectory;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rewards::{Command, RewardBreakdown};

pub use skate::{body_signals, deck_yaw, observation, terminated, SkateEnv, OBS_DIM, OBS_LAYOUT};
pub use toy::{DeckVelocityEnv, ToyConfig, TOY_OBS_DIM};
pub use trajectory::{ContactRecord, TrajectoryFrame};

pub type EnvRng = ChaCha8Rng;

/// Actuated joints, in actuator order.
pub const N_ACT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Fell,
    Tilted,
    BoardLost,
    Diverged,
    /// Episode reached `max_steps`; the state is not terminal.
    Timeout,
}

impl Termination {
    pub fn is_truncation(self) -> bool {
        self == Termination::Timeout
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Fell => "fell",
            Termination::Tilted => "tilted",
            Termination::BoardLost => "board_lost",
            Termination::Diverged => "diverged",
            Termination::Timeout => "timeout",
        }
    }
}

/// Result of one control step.
#[derive(Debug, Clone)]
pub struct Step {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: Option<Termination>,
    pub breakdown: Option<RewardBreakdown>,
    /// Deck forward-velocity error against the command, m/s.
    pub tracking_error: f64,
}

/// A resettable control task with normalized actions. Action component `i`
/// is nominally in `[-1, 1]`; environments clamp out-of-range values.
pub trait Environment: Send {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    /// Action that reproduces the reset pose or a neutral input.
    fn nominal_action(&self) -> Vec<f64>;
    fn reset(&mut self, rng: &mut EnvRng) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Step;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Control steps per episode.
    pub max_steps: usize,
    /// Physics steps per control step.
    pub substeps: usize,
    /// Physics time step, s.
    pub dt: f64,
    pub min_pelvis_height: f64,
    pub max_pelvis_tilt: f64,
    pub max_foot_deck_distance: f64,
    /// Half-width of uniform joint-angle noise at reset, rad.
    pub joint_noise: f64,
    /// Half-width of uniform base-position noise at reset, m.
    pub base_noise: f64,
    /// Proportional gains per leg joint (hip yaw, hip roll, hip pitch, knee,
    /// ankle pitch, ankle roll), N m/rad.
    pub kp: [f64; 6],
    /// Derivative gains; critically damped from reflected inertia when absent.
    pub kd: Option<[f64; 6]>,
    /// Knee half-bend of the ground leg in the reset pose, rad.
    pub stance_bend: f64,
    /// Deck-frame forward offset of the right sole center at reset, m.
    pub foot_on_deck_x: f64,
    /// Fixed forward command; sampled per episode from `[0, 1]` when absent.
    pub command_vx: Option<f64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            max_steps: 1000,
            substeps: 10,
            dt: 0.002,
            min_pelvis_height: 0.6,
            max_pelvis_tilt: 0.8,
            max_foot_deck_distance: 0.3,
            joint_noise: 0.03,
            base_noise: 0.01,
            kp: [100.0, 100.0, 100.0, 100.0, 40.0, 40.0],
            kd: None,
            stance_bend: 0.25,
            foot_on_deck_x: 0.1,
            command_vx: None,
        }
    }
}

impl EnvConfig {
    pub fn control_dt(&self) -> f64 {
        self.substeps as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(invalid("env.max_steps", "must be at least 1"));
        }
        if self.substeps == 0 {
            return Err(invalid("env.substeps", "must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(invalid("env.dt", "must lie in (0, 0.01]"));
        }
        for (name, x) in [
            ("env.min_pelvis_height", self.min_pelvis_height),
            ("env.max_pelvis_tilt", self.max_pelvis_tilt),
            ("env.max_foot_deck_distance", self.max_foot_deck_distance),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        for (name, x) in [("env.joint_noise", self.joint_noise), ("env.base_noise", self.base_noise)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(invalid(name, "must be non-negative"));
            }
        }
        for (i, k) in self.kp.iter().enumerate() {
            if !(k.is_finite() && *k > 0.0) {
                return Err(invalid(format!("env.kp[{i}]"), "must be positive"));
            }
        }
        if let Some(kd) = &self.kd {
            for (i, k) in kd.iter().enumerate() {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(invalid(format!("env.kd[{i}]"), "must be positive"));
                }
            }
        }
        if !(self.stance_bend > 0.0 && self.stance_bend < 1.0) {
            return Err(invalid("env.stance_bend", "must lie in (0, 1) rad"));
        }
        if !self.foot_on_deck_x.is_finite() {
            return Err(invalid("env.foot_on_deck_x", "must be finite"));
        }
        if let Some(v) = self.command_vx {
            Command::forward(v).validate()?;
        }
        Ok(())
    }
}

/// Forward command with `v_x ~ U[0, 1]`.
pub fn sample_command(rng: &mut impl Rng) -> Command {
    Command::forward(rng.random_range(0.0..=1.0))
}

/// Joint PD law `kp (target - q) - kd qd`, clamped to `±limit`.
pub fn pd_torque(target: &[f64], q: &[f64], qd: &[f64], kp: &[f64], kd: &[f64], limit: &[f64]) -> Vec<f64> {
    (0..target.len())
        .map(|i| (kp[i] * (target[i] - q[i]) - kd[i] * qd[i]).clamp(-limit[i], limit[i]))
        .collect()
}
