//! Deck rewards, periodic contact rewards, the base tracking and
//! regularization set, and the weighted total.

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gait::{GaitClock, GaitFoot};

/// Target planar velocity: forward speed, lateral speed and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub v_x: f64,
    pub v_y: f64,
    pub yaw_rate: f64,
}

impl Command {
    pub fn forward(v_x: f64) -> Self {
        Self {
            v_x,
            v_y: 0.0,
            yaw_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.v_x) {
            return Err(invalid("command.v_x", "must lie in [0, 1] m/s"));
        }
        if self.v_y != 0.0 {
            return Err(invalid("command.v_y", "must be 0 for forward pushing"));
        }
        if self.yaw_rate != 0.0 {
            return Err(invalid("command.yaw_rate", "must be 0 for forward pushing"));
        }
        Ok(())
    }
}

/// Quantities the rewards read, all extracted from one simulation state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodySignals {
    pub v_deck_xy: [f64; 2],
    pub omega_deck_z: f64,
    /// Deck roll and pitch rates.
    pub omega_deck_xy: [f64; 2],
    pub v_right: [f64; 3],
    pub v_right_xy: [f64; 2],
    pub omega_right_xy: [f64; 2],
    pub v_com_xy: [f64; 2],
    pub omega_base_z: f64,
    /// Total normal contact force on each foot `[left, right]`, N.
    pub foot_force: [f64; 2],
    /// Speed of each foot `[left, right]`, m/s.
    pub foot_speed: [f64; 2],
    pub right_on_deck: bool,
}

pub const TERM_NAMES: [&str; 11] = [
    "deck_lin_track",
    "deck_ang_track",
    "deck_foot_world_vel",
    "foot_slip",
    "foot_rot",
    "com_lin_track",
    "base_yaw_track",
    "periodic_contact",
    "action_rate",
    "torque",
    "alive",
];
pub const N_TERMS: usize = TERM_NAMES.len();

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub deck_lin_track: f64,
    pub deck_ang_track: f64,
    pub deck_foot_world_vel: f64,
    pub foot_slip: f64,
    pub foot_rot: f64,
    pub com_lin_track: f64,
    pub base_yaw_track: f64,
    pub periodic_contact: f64,
    pub action_rate: f64,
    pub torque: f64,
    pub alive: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            deck_lin_track: 1.0,
            deck_ang_track: 1.0,
            deck_foot_world_vel: 0.5,
            foot_slip: -1.0,
            foot_rot: -1.0,
            com_lin_track: 1.0,
            base_yaw_track: 0.5,
            periodic_contact: 1.0,
            action_rate: -0.01,
            torque: -2e-5,
            alive: 0.5,
        }
    }
}

impl RewardWeights {
    /// Weights in `TERM_NAMES` order.
    pub fn as_array(&self) -> [f64; N_TERMS] {
        [
            self.deck_lin_track,
            self.deck_ang_track,
            self.deck_foot_world_vel,
            self.foot_slip,
            self.foot_rot,
            self.com_lin_track,
            self.base_yaw_track,
            self.periodic_contact,
            self.action_rate,
            self.torque,
            self.alive,
        ]
    }

    pub fn zero() -> Self {
        Self {
            deck_lin_track: 0.0,
            deck_ang_track: 0.0,
            deck_foot_world_vel: 0.0,
            foot_slip: 0.0,
            foot_rot: 0.0,
            com_lin_track: 0.0,
            base_yaw_track: 0.0,
            periodic_contact: 0.0,
            action_rate: 0.0,
            torque: 0.0,
            alive: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Tracking scale shared by all exponential terms.
    pub sigma: f64,
    /// Contact-force threshold for a loaded foot, N.
    pub f_min: f64,
    /// Speed below which a swinging foot counts as still, m/s.
    pub v_swing_max: f64,
    pub weights: RewardWeights,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            sigma: 0.25,
            f_min: 20.0,
            v_swing_max: 0.2,
            weights: RewardWeights::default(),
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid("reward.sigma", "must be positive"));
        }
        if !(self.f_min.is_finite() && self.f_min >= 0.0) {
            return Err(invalid("reward.f_min", "must be non-negative"));
        }
        if !(self.v_swing_max.is_finite() && self.v_swing_max > 0.0) {
            return Err(invalid("reward.v_swing_max", "must be positive"));
        }
        let w = self.weights.as_array();
        for (name, x) in TERM_NAMES.iter().zip(w) {
            if !x.is_finite() {
                return Err(invalid(format!("reward.weights.{name}"), "must be finite"));
            }
        }
        for name in ["foot_slip", "foot_rot", "action_rate", "torque"] {
            let i = TERM_NAMES.iter().position(|n| *n == name).expect("known term");
            if w[i] > 0.0 {
                return Err(invalid(format!("reward.weights.{name}"), "penalty weight must not be positive"));
            }
        }
        Ok(())
    }
}

/// Unweighted term values in `TERM_NAMES` order and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub terms: [f64; N_TERMS],
    pub total: f64,
}

impl RewardBreakdown {
    pub fn get(&self, name: &str) -> Option<f64> {
        TERM_NAMES.iter().position(|n| *n == name).map(|i| self.terms[i])
    }
}

impl Serialize for RewardBreakdown {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(N_TERMS + 1))?;
        for (name, v) in TERM_NAMES.iter().zip(&self.terms) {
            m.serialize_entry(name, v)?;
        }
        m.serialize_entry("total", &self.total)?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for RewardBreakdown {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = RewardBreakdown;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map of reward terms and total")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<RewardBreakdown, A::Error> {
                let mut terms = [f64::NAN; N_TERMS];
                let mut total = None;
                while let Some(key) = map.next_key::<String>()? {
                    let value: f64 = map.next_value()?;
                    if key == "total" {
                        total = Some(value);
                    } else if let Some(i) = TERM_NAMES.iter().position(|n| *n == key) {
                        terms[i] = value;
                    } else {
                        return Err(de::Error::unknown_field(&key, &TERM_NAMES));
                    }
                }
                if let Some(i) = terms.iter().position(|x| x.is_nan()) {
                    return Err(de::Error::missing_field(TERM_NAMES[i]));
                }
                Ok(RewardBreakdown {
                    terms,
                    total: total.ok_or_else(|| de::Error::missing_field("total"))?,
                })
            }
        }
        d.deserialize_map(V)
    }
}

fn sq2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Deck linear velocity tracking, `exp(-|v_cmd - v_deck|^2 / sigma)`.
pub fn r1_deck_lin_track(cmd: &Command, sig: &BodySignals, sigma: f64) -> f64 {
    (-sq2([cmd.v_x, cmd.v_y], sig.v_deck_xy) / sigma).exp()
}

/// Deck yaw-rate tracking, `exp(-(w_cmd - w_deck)^2 / sigma)`.
pub fn r2_deck_ang_track(cmd: &Command, sig: &BodySignals, sigma: f64) -> f64 {
    (-(cmd.yaw_rate - sig.omega_deck_z).powi(2) / sigma).exp()
}

/// Squared world speed of the right foot.
pub fn r3_deck_foot_world_vel(sig: &BodySignals) -> f64 {
    sig.v_right.iter().map(|x| x * x).sum()
}

/// Squared planar slip of the right foot relative to the deck.
pub fn r4_foot_slip_penalty(sig: &BodySignals) -> f64 {
    sq2(sig.v_deck_xy, sig.v_right_xy)
}

/// Squared roll and pitch rate of the right foot relative to the deck.
pub fn r5_foot_rot_penalty(sig: &BodySignals) -> f64 {
    sq2(sig.omega_deck_xy, sig.omega_right_xy)
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Base set, unweighted, in the order com tracking, base yaw tracking,
/// periodic contact, action rate, torque, alive. A foot expected in contact
/// scores when loaded above `f_min`; a foot expected in swing scores when
/// unloaded and slower than `v_swing_max`.
pub fn base_rewards(
    cmd: &Command,
    sig: &BodySignals,
    clock: &GaitClock,
    action_prev: &[f64],
    action: &[f64],
    torque: &[f64],
    cfg: &RewardConfig,
) -> [f64; 6] {
    let com = (-sq2([cmd.v_x, cmd.v_y], sig.v_com_xy) / cfg.sigma).exp();
    let yaw = (-(cmd.yaw_rate - sig.omega_base_z).powi(2) / cfg.sigma).exp();
    let mut periodic = 0.0;
    for (k, foot) in [GaitFoot::Left, GaitFoot::Right].into_iter().enumerate() {
        let expected = clock.expected_contact(foot);
        let loaded = sig.foot_force[k] > cfg.f_min;
        let swing = !loaded && sig.foot_speed[k] < cfg.v_swing_max;
        periodic += expected * indicator(loaded) + (1.0 - expected) * indicator(swing);
    }
    let rate: f64 = action.iter().zip(action_prev).map(|(a, b)| (a - b).powi(2)).sum();
    let tau: f64 = torque.iter().map(|t| t * t).sum();
    [com, yaw, periodic, rate, tau, 1.0]
}

pub fn total_reward(
    cmd: &Command,
    sig: &BodySignals,
    clock: &GaitClock,
    action_prev: &[f64],
    action: &[f64],
    torque: &[f64],
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let r3 = if sig.right_on_deck {
        r3_deck_foot_world_vel(sig)
    } else {
        0.0
    };
    let base = base_rewards(cmd, sig, clock, action_prev, action, torque, cfg);
    let terms = [
        r1_deck_lin_track(cmd, sig, cfg.sigma),
        r2_deck_ang_track(cmd, sig, cfg.sigma),
        r3,
        r4_foot_slip_penalty(sig),
        r5_foot_rot_penalty(sig),
        base[0],
        base[1],
        base[2],
        base[3],
        base[4],
        base[5],
    ];
    let total = terms.iter().zip(cfg.weights.as_array()).map(|(t, w)| w * t).sum();
    RewardBreakdown { terms, total }
}
