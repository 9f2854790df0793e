//! Compliant unilateral contacts with regularized Coulomb friction.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactMaterial {
    /// Normal stiffness, N/m.
    pub k_c: f64,
    /// Normal damping, N s/m.
    pub b_c: f64,
    /// Friction regularization velocity, m/s.
    pub v_eps: f64,
}

impl Default for ContactMaterial {
    fn default() -> Self {
        Self {
            k_c: 1.0e4,
            b_c: 100.0,
            v_eps: 0.01,
        }
    }
}

impl ContactMaterial {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_c.is_finite() && self.k_c > 0.0) {
            return Err(invalid("contact.k_c", "must be positive"));
        }
        if !(self.b_c.is_finite() && self.b_c >= 0.0) {
            return Err(invalid("contact.b_c", "must be non-negative"));
        }
        if !(self.v_eps.is_finite() && self.v_eps > 0.0) {
            return Err(invalid("contact.v_eps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactPair {
    FootGround,
    FootDeck,
    WheelGround,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeId {
    Robot,
    Board,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BodyRef {
    pub tree: TreeId,
    pub link: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Foot {
    Left,
    Right,
}

/// One penetrating contact point. The contact force acts on `body` along
/// `normal`; the reaction acts on `other` when present (the deck).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveContact {
    pub pair: ContactPair,
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub penetration: f64,
    /// Velocity of `body` relative to the opposing surface at `point`.
    pub rel_velocity: Vector3<f64>,
    pub friction_frame: [Vector3<f64>; 2],
    pub mu: [f64; 2],
    pub body: BodyRef,
    pub other: Option<BodyRef>,
    pub foot: Option<Foot>,
}

/// Force on `body` at the contact point. The torque about the point is zero
/// for point contacts and is kept for a uniform wrench interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
    pub normal_force: f64,
}

/// Penalty normal force `max(0, k pen - b v_n)` with `v_n` the separating
/// normal velocity, and per-direction regularized Coulomb friction.
pub fn contact_force(c: &ActiveContact, mat: &ContactMaterial) -> Wrench {
    let v_n = c.rel_velocity.dot(&c.normal);
    let f_n = (mat.k_c * c.penetration - mat.b_c * v_n).max(0.0);
    let mut force = f_n * c.normal;
    for (t, mu) in c.friction_frame.iter().zip(c.mu) {
        let v_t = c.rel_velocity.dot(t);
        force -= mu * f_n * (v_t / mat.v_eps).tanh() * t;
    }
    Wrench {
        force,
        torque: Vector3::zeros(),
        normal_force: f_n,
    }
}

/// Velocity derivative of the contact force (negated, so positive
/// semi-definite) used by the linearly implicit velocity update.
pub fn contact_damping(c: &ActiveContact, mat: &ContactMaterial, normal_force: f64) -> Matrix3<f64> {
    if normal_force <= 0.0 {
        return Matrix3::zeros();
    }
    let mut d = mat.b_c * c.normal * c.normal.transpose();
    for (t, mu) in c.friction_frame.iter().zip(c.mu) {
        let x = c.rel_velocity.dot(t) / mat.v_eps;
        let sech2 = 1.0 - x.tanh().powi(2);
        d += (mu * normal_force * sech2 / mat.v_eps) * t * t.transpose();
    }
    d
}
