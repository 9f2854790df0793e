use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use super::trajectory::{ContactRecord, TrajectoryFrame};
use super::{pd_torque, sample_command, EnvConfig, EnvRng, Environment, Step, Termination, N_ACT};
use crate::dynamics::{root_quaternion, ContactPair, Foot, SimState, World};
use crate::error::{Error, Result};
use crate::gait::{GaitClock, GaitFoot, GaitSchedule};
use crate::model::LEG_JOINTS;
use crate::rewards::{total_reward, BodySignals, Command, RewardBreakdown, RewardConfig};

pub const OBS_DIM: usize = 47;

/// Observation blocks as `(name, offset, length)`.
pub const OBS_LAYOUT: [(&str, usize, usize); 10] = [
    ("joint_pos", 0, 12),
    ("joint_vel", 12, 12),
    ("base_gravity", 24, 3),
    ("base_ang_vel", 27, 3),
    ("base_lin_vel", 30, 3),
    ("command", 33, 3),
    ("clock", 36, 2),
    ("deck_pos", 38, 3),
    ("deck_lin_vel", 41, 3),
    ("deck_ang_vel", 44, 3),
];

const IDX_HIP_PITCH: usize = 2;
const IDX_KNEE: usize = 3;
const IDX_ANKLE_PITCH: usize = 4;

/// Humanoid pushing a skateboard with its left foot while the right foot
/// rides the deck.
#[derive(Debug, Clone)]
pub struct SkateEnv {
    world: Arc<World>,
    cfg: EnvConfig,
    reward: RewardConfig,
    nominal: SimState,
    nominal_targets: [f64; N_ACT],
    lo: [f64; N_ACT],
    hi: [f64; N_ACT],
    kp: [f64; N_ACT],
    kd: [f64; N_ACT],
    tau_limit: [f64; N_ACT],
    /// Robot coordinate index of each actuator.
    q_index: [usize; N_ACT],
    state: SimState,
    clock: GaitClock,
    command: Command,
    steps: usize,
    prev_targets: [f64; N_ACT],
    last: LastStep,
}

#[derive(Debug, Clone, Default)]
struct LastStep {
    prev_targets: [f64; N_ACT],
    targets: [f64; N_ACT],
    torque: [f64; N_ACT],
    breakdown: Option<RewardBreakdown>,
    signals: BodySignals,
    done: Option<Termination>,
}

impl SkateEnv {
    pub fn new(world: Arc<World>, cfg: EnvConfig, reward: RewardConfig, gait: GaitSchedule) -> Result<Self> {
        cfg.validate()?;
        reward.validate()?;
        gait.validate()?;
        if !world.robot_active {
            return Err(Error::Config {
                field: "env".into(),
                reason: "the skateboarding task needs an active robot".into(),
            });
        }
        let r = &world.params.robot;
        let mut lo = [0.0; N_ACT];
        let mut hi = [0.0; N_ACT];
        let mut kp = [0.0; N_ACT];
        let mut tau_limit = [0.0; N_ACT];
        let mut q_index = [0; N_ACT];
        for (k, &vi) in world.actuated_indices().iter().enumerate() {
            let j = k % LEG_JOINTS.len();
            lo[k] = r.joint_limits[j][0];
            hi[k] = r.joint_limits[j][1];
            kp[k] = cfg.kp[j];
            tau_limit[k] = r.torque_limits[j];
            q_index[k] = vi + 1;
        }
        let mut env = Self {
            world,
            cfg,
            reward,
            nominal: SimState {
                q_robot: Vec::new(),
                v_robot: Vec::new(),
                q_board: Vec::new(),
                v_board: Vec::new(),
                t: 0.0,
                contact_cache: Vec::new(),
            },
            nominal_targets: [0.0; N_ACT],
            lo,
            hi,
            kp,
            kd: [0.0; N_ACT],
            tau_limit,
            q_index,
            state: SimState {
                q_robot: Vec::new(),
                v_robot: Vec::new(),
                q_board: Vec::new(),
                v_board: Vec::new(),
                t: 0.0,
                contact_cache: Vec::new(),
            },
            clock: GaitClock::new(gait),
            command: Command::forward(0.0),
            steps: 0,
            prev_targets: [0.0; N_ACT],
            last: LastStep::default(),
        };
        env.nominal = env.build_nominal()?;
        for (k, &qi) in env.q_index.iter().enumerate() {
            env.nominal_targets[k] = env.nominal.q_robot[qi];
        }
        let m = env.world.robot.mass_matrix(&env.nominal.q_robot)?;
        for (k, &vi) in env.world.actuated_indices().iter().enumerate() {
            env.kd[k] = match &env.cfg.kd {
                Some(kd) => kd[k % LEG_JOINTS.len()],
                None => 2.0 * (env.kp[k] * m[(vi, vi)]).sqrt(),
            };
        }
        env.state = env.nominal.clone();
        env.prev_targets = env.nominal_targets;
        env.command = Command::forward(env.cfg.command_vx.unwrap_or(0.0));
        Ok(env)
    }

    /// Reset pose: both legs flexed with flat feet, the left sole on the
    /// ground and the right sole on the deck top, contacts preloaded at
    /// their static compression.
    fn build_nominal(&self) -> Result<SimState> {
        let w = &*self.world;
        let mut state = w.board_rest_state();
        let mut q = w.robot.neutral_q();
        let alpha_l = self.cfg.stance_bend;
        let set_leg = |q: &mut Vec<f64>, leg: usize, alpha: f64| {
            let base = leg * LEG_JOINTS.len();
            q[self.q_index[base + IDX_HIP_PITCH]] = -alpha;
            q[self.q_index[base + IDX_KNEE]] = 2.0 * alpha;
            q[self.q_index[base + IDX_ANKLE_PITCH]] = -alpha;
        };
        let left = w.foot_link(Foot::Left);
        let right = w.foot_link(Foot::Right);
        let sole = w.sole_center();
        let sole_z = |q: &[f64], link: usize| w.robot.positions(q).to_world(link, &sole).z;

        let k = w.material.k_c;
        let half_weight = 0.5 * w.robot.total_mass * w.gravity.norm();
        let foot_pen = half_weight / (4.0 * k);
        let wheel_pen = (half_weight + w.board.total_mass * w.gravity.norm()) / (4.0 * k);
        // Both soles sink by `foot_pen`, so the right sole sits above the
        // left one by the compressed deck-top height.
        let rise = w.params.skateboard.deck_top_height() - wheel_pen;

        set_leg(&mut q, 0, alpha_l);
        let (mut a, mut b) = (alpha_l, 1.4);
        let gap = |q: &mut Vec<f64>, alpha: f64| {
            set_leg(q, 1, alpha);
            sole_z(q, right) - sole_z(q, left) - rise
        };
        if gap(&mut q, a) > 0.0 || gap(&mut q, b) < 0.0 {
            return Err(Error::Config {
                field: "env.stance_bend".into(),
                reason: "no right-leg bend places the right foot on the deck".into(),
            });
        }
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if gap(&mut q, mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        set_leg(&mut q, 1, 0.5 * (a + b));
        for k in 0..N_ACT {
            let x = q[self.q_index[k]];
            if x < self.lo[k] || x > self.hi[k] {
                return Err(Error::Config {
                    field: "env.stance_bend".into(),
                    reason: format!("reset pose violates the limits of actuator {k}"),
                });
            }
        }
        q[2] = -foot_pen - sole_z(&q, left);

        let kin = w.robot.positions(&q);
        let sole_r = kin.to_world(right, &sole);
        state.q_board[0] = sole_r.x - self.cfg.foot_on_deck_x;
        state.q_board[1] = sole_r.y;
        state.q_board[2] -= wheel_pen;
        state.q_robot = q;
        Ok(state)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn clock(&self) -> &GaitClock {
        &self.clock
    }

    pub fn command(&self) -> Command {
        self.command
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nominal_state(&self) -> &SimState {
        &self.nominal
    }

    pub fn nominal_targets(&self) -> [f64; N_ACT] {
        self.nominal_targets
    }

    pub fn joint_limits(&self) -> ([f64; N_ACT], [f64; N_ACT]) {
        (self.lo, self.hi)
    }

    pub fn gains(&self) -> ([f64; N_ACT], [f64; N_ACT]) {
        (self.kp, self.kd)
    }

    /// Replace the episode state, e.g. for audits or scripted tests.
    pub fn set_state(&mut self, state: SimState, clock: GaitClock, command: Command) {
        self.state = state;
        self.clock = clock;
        self.command = command;
    }

    /// Joint targets for a normalized action, clamped to the joint limits.
    pub fn targets(&self, action: &[f64]) -> [f64; N_ACT] {
        let mut out = [0.0; N_ACT];
        for k in 0..N_ACT {
            let mid = 0.5 * (self.lo[k] + self.hi[k]);
            let half = 0.5 * (self.hi[k] - self.lo[k]);
            let a = if action[k].is_finite() { action[k] } else { 0.0 };
            out[k] = (mid + half * a).clamp(self.lo[k], self.hi[k]);
        }
        out
    }

    /// PD torques toward `targets` at `state`.
    pub fn apply_action(&self, targets: &[f64], state: &SimState) -> Vec<f64> {
        let q: Vec<f64> = self.q_index.iter().map(|&i| state.q_robot[i]).collect();
        let qd = self.world.joint_velocities(state);
        pd_torque(targets, &q, &qd, &self.kp, &self.kd, &self.tau_limit)
    }

    /// Reset with an explicit command instead of a sampled one.
    pub fn reset_with_command(&mut self, rng: &mut EnvRng, command: Option<Command>) -> Vec<f64> {
        let mut s = self.nominal.clone();
        for k in 0..N_ACT {
            let n = self.uniform(rng, self.cfg.joint_noise);
            let qi = self.q_index[k];
            s.q_robot[qi] = (s.q_robot[qi] + n).clamp(self.lo[k], self.hi[k]);
        }
        s.q_robot[0] += self.uniform(rng, self.cfg.base_noise);
        s.q_robot[1] += self.uniform(rng, self.cfg.base_noise);
        s.q_robot[2] += if self.cfg.base_noise > 0.0 {
            rng.random_range(0.0..self.cfg.base_noise)
        } else {
            0.0
        };
        let sampled = sample_command(rng);
        self.command = command.unwrap_or(match self.cfg.command_vx {
            Some(v) => Command::forward(v),
            None => sampled,
        });
        self.state = s;
        self.clock = GaitClock::new(self.clock.schedule);
        self.steps = 0;
        self.prev_targets = self.nominal_targets;
        self.last = LastStep {
            prev_targets: self.nominal_targets,
            targets: self.nominal_targets,
            signals: self.signals(&self.state),
            ..Default::default()
        };
        self.observe()
    }

    fn uniform(&self, rng: &mut EnvRng, half: f64) -> f64 {
        if half > 0.0 {
            rng.random_range(-half..half)
        } else {
            0.0
        }
    }

    pub fn observe(&self) -> Vec<f64> {
        observation(&self.world, &self.state, &self.clock, &self.command)
    }

    /// Reward inputs extracted from `state`.
    pub fn signals(&self, state: &SimState) -> BodySignals {
        body_signals(&self.world, state)
    }

    pub fn terminated(&self, state: &SimState) -> Option<Termination> {
        terminated(&self.world, state, &self.cfg)
    }

    /// Trajectory record of the most recent step.
    pub fn frame(&self) -> TrajectoryFrame {
        let w = &*self.world;
        let contacts = w.contact_detect(&self.state);
        let forces = w.contact_forces(&contacts);
        TrajectoryFrame {
            step: self.steps,
            t: self.state.t,
            phase: self.clock.phase_time,
            expected_contact: [
                self.clock.expected_contact(GaitFoot::Left),
                self.clock.expected_contact(GaitFoot::Right),
            ],
            command: self.command,
            q: self.state.q_robot.clone(),
            v: self.state.v_robot.clone(),
            q_board: self.state.q_board.clone(),
            v_board: self.state.v_board.clone(),
            action: self.last.targets.to_vec(),
            previous_action: self.last.prev_targets.to_vec(),
            torque: self.last.torque.to_vec(),
            signals: self.last.signals,
            reward: self.last.breakdown,
            contacts: contacts
                .iter()
                .zip(&forces)
                .map(|(c, f)| ContactRecord {
                    pair: c.pair,
                    foot: c.foot,
                    point: [c.point.x, c.point.y, c.point.z],
                    penetration: c.penetration,
                    normal_force: f.normal_force,
                })
                .collect(),
            termination: self.last.done,
        }
    }
}

impl Environment for SkateEnv {
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn act_dim(&self) -> usize {
        N_ACT
    }

    fn nominal_action(&self) -> Vec<f64> {
        (0..N_ACT)
            .map(|k| {
                let mid = 0.5 * (self.lo[k] + self.hi[k]);
                let half = 0.5 * (self.hi[k] - self.lo[k]);
                (self.nominal_targets[k] - mid) / half
            })
            .collect()
    }

    fn reset(&mut self, rng: &mut EnvRng) -> Vec<f64> {
        self.reset_with_command(rng, None)
    }

    fn step(&mut self, action: &[f64]) -> Step {
        let targets = self.targets(action);
        let mut torque = [0.0; N_ACT];
        let mut diverged = false;
        for _ in 0..self.cfg.substeps {
            let tau = self.apply_action(&targets, &self.state);
            match self.world.step(&self.state, &tau, self.cfg.dt) {
                Ok(next) => {
                    self.state = next;
                    torque.copy_from_slice(&tau);
                }
                Err(_) => {
                    diverged = true;
                    break;
                }
            }
        }
        self.clock = self.clock.advance(self.cfg.control_dt());
        self.steps += 1;

        let signals = self.signals(&self.state);
        let breakdown = total_reward(
            &self.command,
            &signals,
            &self.clock,
            &self.prev_targets,
            &targets,
            &torque,
            &self.reward,
        );
        let done = if diverged {
            Some(Termination::Diverged)
        } else {
            self.terminated(&self.state)
                .or((self.steps >= self.cfg.max_steps).then_some(Termination::Timeout))
        };
        self.last = LastStep {
            prev_targets: self.prev_targets,
            targets,
            torque,
            breakdown: Some(breakdown),
            signals,
            done,
        };
        self.prev_targets = targets;
        Step {
            obs: self.observe(),
            reward: breakdown.total,
            done,
            breakdown: Some(breakdown),
            tracking_error: (signals.v_deck_xy[0] - self.command.v_x).abs(),
        }
    }
}

/// Policy observation; see `OBS_LAYOUT`.
pub fn observation(world: &World, state: &SimState, clock: &GaitClock, command: &Command) -> Vec<f64> {
    let mut o = Vec::with_capacity(OBS_DIM);
    o.extend(world.joint_positions(state));
    o.extend(world.joint_velocities(state));
    let rot = root_quaternion(&state.q_robot).to_rotation_matrix().into_inner();
    let rt = rot.transpose();
    let v = &state.v_robot;
    o.extend((rt * Vector3::new(0.0, 0.0, -1.0)).iter());
    o.extend((rt * Vector3::new(v[3], v[4], v[5])).iter());
    o.extend((rt * Vector3::new(v[0], v[1], v[2])).iter());
    o.extend([command.v_x, command.v_y, command.yaw_rate]);
    o.extend(clock.clock_features());
    let rel = Vector3::new(
        state.q_board[0] - state.q_robot[0],
        state.q_board[1] - state.q_robot[1],
        state.q_board[2] - state.q_robot[2],
    );
    o.extend((rt * rel).iter());
    o.extend(&state.v_board[0..6]);
    debug_assert_eq!(o.len(), OBS_DIM);
    o
}

fn xy(v: &Vector3<f64>) -> [f64; 2] {
    [v.x, v.y]
}

/// Reward inputs from one state. Roll and pitch rates of the deck and the
/// right foot are expressed in the deck frame.
pub fn body_signals(world: &World, state: &SimState) -> BodySignals {
    let (kr, kb) = world.kinematics(state);
    let deck_rot: Matrix3<f64> = kb.rot[0];
    let w_deck = Vector3::new(state.v_board[3], state.v_board[4], state.v_board[5]);
    let sole = world.sole_center();
    let foot_vel = |foot: Foot| {
        let link = world.foot_link(foot);
        kr.point_velocity(link, &kr.to_world(link, &sole))
    };
    let right = world.foot_link(Foot::Right);
    let v_right = foot_vel(Foot::Right);
    let w_right = deck_rot.transpose() * kr.omega[right];
    let v_com = world.robot.com_velocity(&kr);

    let contacts = world.contact_detect(state);
    let forces = world.contact_forces(&contacts);
    let mut foot_force = [0.0; 2];
    let mut right_on_deck = false;
    for (c, f) in contacts.iter().zip(&forces) {
        match c.foot {
            Some(Foot::Left) => foot_force[0] += f.normal_force,
            Some(Foot::Right) => foot_force[1] += f.normal_force,
            None => {}
        }
        if c.pair == ContactPair::FootDeck && f.normal_force > 0.0 {
            right_on_deck = true;
        }
    }
    BodySignals {
        v_deck_xy: [state.v_board[0], state.v_board[1]],
        omega_deck_z: w_deck.z,
        omega_deck_xy: xy(&(deck_rot.transpose() * w_deck)),
        v_right: [v_right.x, v_right.y, v_right.z],
        v_right_xy: xy(&v_right),
        omega_right_xy: xy(&w_right),
        v_com_xy: xy(&v_com),
        omega_base_z: state.v_robot[5],
        foot_force,
        foot_speed: [foot_vel(Foot::Left).norm(), v_right.norm()],
        right_on_deck,
    }
}

/// First matching termination rule, if any.
pub fn terminated(world: &World, state: &SimState, cfg: &EnvConfig) -> Option<Termination> {
    if state.check_invariants().is_err() {
        return Some(Termination::Diverged);
    }
    if state.q_robot[2] < cfg.min_pelvis_height {
        return Some(Termination::Fell);
    }
    let rot = root_quaternion(&state.q_robot).to_rotation_matrix();
    let tilt = rot[(2, 2)].clamp(-1.0, 1.0).acos();
    if tilt > cfg.max_pelvis_tilt {
        return Some(Termination::Tilted);
    }
    let kin = world.robot.positions(&state.q_robot);
    let sole = kin.to_world(world.foot_link(Foot::Right), &world.sole_center());
    let dx = sole.x - state.q_board[0];
    let dy = sole.y - state.q_board[1];
    if dx.hypot(dy) > cfg.max_foot_deck_distance {
        return Some(Termination::BoardLost);
    }
    None
}

/// Deck-frame yaw of the board, rad.
pub fn deck_yaw(state: &SimState) -> f64 {
    let r = root_quaternion(&state.q_board).to_rotation_matrix();
    r[(1, 0)].atan2(r[(0, 0)])
}

