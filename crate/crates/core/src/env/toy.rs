use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{sample_command, EnvRng, Environment, Step, Termination};
use crate::dynamics::{ExternalForces, SimState, World};
use crate::error::{invalid, Error, Result};
use crate::rewards::{r1_deck_lin_track, BodySignals, Command};

pub const TOY_OBS_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub episode_steps: usize,
    /// Push force at full action, N.
    pub max_force: f64,
    pub substeps: usize,
    pub dt: f64,
    pub sigma: f64,
    /// Fixed forward command; sampled from `[0, 1]` when absent.
    pub command_vx: Option<f64>,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            episode_steps: 64,
            max_force: 20.0,
            substeps: 10,
            dt: 0.002,
            sigma: 0.25,
            command_vx: None,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episode_steps == 0 {
            return Err(invalid("toy.episode_steps", "must be at least 1"));
        }
        if self.substeps == 0 {
            return Err(invalid("toy.substeps", "must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(invalid("toy.dt", "must lie in (0, 0.01]"));
        }
        for (name, x) in [("toy.max_force", self.max_force), ("toy.sigma", self.sigma)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if let Some(v) = self.command_vx {
            Command::forward(v).validate()?;
        }
        Ok(())
    }
}

/// Board-only task: one scalar push force along the deck heading drives the
/// deck toward a commanded forward speed.
#[derive(Debug, Clone)]
pub struct DeckVelocityEnv {
    world: Arc<World>,
    cfg: ToyConfig,
    rest: SimState,
    state: SimState,
    command: Command,
    steps: usize,
}

impl DeckVelocityEnv {
    pub fn new(world: Arc<World>, cfg: ToyConfig) -> Result<Self> {
        cfg.validate()?;
        if world.robot_active {
            return Err(Error::Config {
                field: "env".into(),
                reason: "the deck-velocity task needs a board-only world".into(),
            });
        }
        let rest = world.board_rest_state();
        Ok(Self {
            state: rest.clone(),
            rest,
            world,
            cfg,
            command: Command::forward(0.0),
            steps: 0,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn command(&self) -> Command {
        self.command
    }

    fn heading(&self) -> Vector3<f64> {
        let h = self.world.deck_rotation(&self.state) * Vector3::x();
        let flat = Vector3::new(h.x, h.y, 0.0);
        let n = flat.norm();
        if n > 1e-9 {
            flat / n
        } else {
            Vector3::x()
        }
    }

    fn observe(&self) -> Vec<f64> {
        let h = self.heading();
        let v = Vector3::new(self.state.v_board[0], self.state.v_board[1], 0.0);
        let fwd = v.dot(&h);
        let lat = h.x * v.y - h.y * v.x;
        vec![fwd, lat, self.command.v_x, self.command.v_x - fwd]
    }
}

impl Environment for DeckVelocityEnv {
    fn obs_dim(&self) -> usize {
        TOY_OBS_DIM
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn nominal_action(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn reset(&mut self, rng: &mut EnvRng) -> Vec<f64> {
        let sampled = sample_command(rng);
        self.command = self.cfg.command_vx.map(Command::forward).unwrap_or(sampled);
        self.state = self.rest.clone();
        self.steps = 0;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Step {
        let a = if action[0].is_finite() { action[0].clamp(-1.0, 1.0) } else { 0.0 };
        let f = self.heading() * (a * self.cfg.max_force);
        let mut gen = vec![0.0; self.state.v_board.len()];
        gen[..3].copy_from_slice(f.as_slice());
        let ext = ExternalForces {
            robot: None,
            board: Some(gen),
        };
        let mut done = None;
        for _ in 0..self.cfg.substeps {
            match self.world.step_with(&self.state, &[], self.cfg.dt, &ext) {
                Ok(next) => self.state = next,
                Err(_) => {
                    done = Some(Termination::Diverged);
                    break;
                }
            }
        }
        self.steps += 1;
        if done.is_none() && self.steps >= self.cfg.episode_steps {
            done = Some(Termination::Timeout);
        }
        let sig = BodySignals {
            v_deck_xy: [self.state.v_board[0], self.state.v_board[1]],
            ..Default::default()
        };
        let obs = self.observe();
        Step {
            reward: r1_deck_lin_track(&self.command, &sig, self.cfg.sigma),
            tracking_error: obs[3].abs(),
            obs,
            done,
            breakdown: None,
        }
    }
}
