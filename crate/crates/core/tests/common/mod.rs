//! Test-only oracles. Nothing here calls into `boardpush::dynamics`; poses
//! are rebuilt from the tree description and velocities come from finite
//! differences of poses.
#![allow(dead_code)]

pub mod ppo_oracle;
pub mod reward_oracle;

use boardpush::model::{JointKind, KinematicTree};
use nalgebra::{Matrix3, Rotation3, Unit, UnitQuaternion, Vector3};

pub struct Pose {
    pub rot: Matrix3<f64>,
    pub com: Vector3<f64>,
    pub origin: Vector3<f64>,
}

/// Body poses in tree body order. Coordinates: root `[p, quat(w,x,y,z)]`
/// then revolute angles in joint-list order.
pub fn poses(tree: &KinematicTree, q: &[f64]) -> Vec<Pose> {
    let mut rot: Vec<Option<Matrix3<f64>>> = vec![None; tree.bodies.len()];
    let mut origin: Vec<Option<Vector3<f64>>> = vec![None; tree.bodies.len()];
    let mut angle_of = std::collections::HashMap::new();
    let mut k = 7;
    for j in &tree.joints {
        if j.kind == JointKind::Revolute {
            angle_of.insert(j.child.clone(), k);
            k += 1;
        }
    }
    // Repeated sweeps until every body is placed.
    let mut remaining = tree.bodies.len();
    while remaining > 0 {
        for j in &tree.joints {
            let c = tree.body_index(&j.child).unwrap();
            if rot[c].is_some() {
                continue;
            }
            match &j.parent {
                None => {
                    let quat = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[3], q[4], q[5], q[6]));
                    rot[c] = Some(*quat.to_rotation_matrix().matrix());
                    origin[c] = Some(Vector3::new(q[0], q[1], q[2]));
                    remaining -= 1;
                }
                Some(p) => {
                    let p = tree.body_index(p).unwrap();
                    if let (Some(rp), Some(op)) = (rot[p], origin[p]) {
                        let theta = q[angle_of[&j.child]];
                        let local = Rotation3::from_axis_angle(&Unit::new_normalize(j.axis), theta);
                        rot[c] = Some(rp * local.matrix());
                        origin[c] = Some(op + rp * j.origin);
                        remaining -= 1;
                    }
                }
            }
        }
    }
    tree.bodies
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let r = rot[i].unwrap();
            let o = origin[i].unwrap();
            Pose {
                rot: r,
                com: o + r * b.com_offset,
                origin: o,
            }
        })
        .collect()
}

/// Moves coordinates along generalized velocity `v` for time `h`:
/// exact for the root (constant world angular velocity) and the joints.
pub fn advance(q: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let mut out = q.to_vec();
    for k in 0..3 {
        out[k] += v[k] * h;
    }
    let quat = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[3], q[4], q[5], q[6]));
    let w = Vector3::new(v[3], v[4], v[5]);
    let nq = UnitQuaternion::from_scaled_axis(w * h) * quat;
    out[3] = nq.w;
    out[4] = nq.i;
    out[5] = nq.j;
    out[6] = nq.k;
    for k in 7..q.len() {
        out[k] += v[k - 1] * h;
    }
    out
}

pub struct BodyVel {
    pub v_com: Vector3<f64>,
    pub omega: Vector3<f64>,
}

/// Body velocities by central differences of poses; the angular velocity is
/// the skew part of `dR/dt R^T`.
pub fn body_velocities(tree: &KinematicTree, q: &[f64], v: &[f64]) -> Vec<BodyVel> {
    let h = 1e-6;
    let here = poses(tree, q);
    let plus = poses(tree, &advance(q, v, h));
    let minus = poses(tree, &advance(q, v, -h));
    here.iter()
        .zip(plus.iter().zip(&minus))
        .map(|(c, (p, m))| {
            let w = (p.rot - m.rot) / (2.0 * h) * c.rot.transpose();
            BodyVel {
                v_com: (p.com - m.com) / (2.0 * h),
                omega: 0.5 * Vector3::new(w[(2, 1)] - w[(1, 2)], w[(0, 2)] - w[(2, 0)], w[(1, 0)] - w[(0, 1)]),
            }
        })
        .collect()
}

pub fn kinetic_energy(tree: &KinematicTree, q: &[f64], v: &[f64]) -> f64 {
    let ps = poses(tree, q);
    let vs = body_velocities(tree, q, v);
    tree.bodies
        .iter()
        .zip(ps.iter().zip(&vs))
        .map(|(b, (p, bv))| {
            let iw = p.rot * b.inertia * p.rot.transpose();
            0.5 * b.mass * bv.v_com.norm_squared() + 0.5 * bv.omega.dot(&(iw * bv.omega))
        })
        .sum()
}

pub fn potential_energy(tree: &KinematicTree, q: &[f64], g: f64) -> f64 {
    let ps = poses(tree, q);
    tree.bodies.iter().zip(&ps).map(|(b, p)| b.mass * g * p.com.z).sum()
}

pub fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Generalized momentum `dT/dv` by polarization of the quadratic form:
/// `T(v + e) - T(v - e) = 2 v^T M e`.
pub fn momentum(tree: &KinematicTree, q: &[f64], v: &[f64]) -> Vec<f64> {
    let nv = v.len();
    (0..nv)
        .map(|k| {
            let e = unit(nv, k);
            let minus: Vec<f64> = v.iter().zip(&e).map(|(a, b)| a - b).collect();
            0.5 * (kinetic_energy(tree, q, &add(v, &e)) - kinetic_energy(tree, q, &minus))
        })
        .collect()
}

/// Joint-space inertia from kinetic energy: column k is the impulse that
/// brings the system from rest to velocity `e_k`.
pub fn mass_matrix(tree: &KinematicTree, q: &[f64]) -> Vec<Vec<f64>> {
    let nv = tree.nv;
    (0..nv).map(|k| momentum(tree, q, &unit(nv, k))).collect()
}

/// Bias forces from analytical mechanics at zero generalized acceleration.
/// Translational and revolute rows use Lagrange's equations on true
/// coordinates; rotational root rows use Euler's law about the moving root
/// origin, `N_o = dL_o/dt + v_o x P`.
pub fn bias(tree: &KinematicTree, q: &[f64], v: &[f64], g: f64) -> Vec<f64> {
    let nv = v.len();
    let h = 1e-4;
    let p_plus = momentum(tree, &advance(q, v, h), v);
    let p_minus = momentum(tree, &advance(q, v, -h), v);
    let dp: Vec<f64> = (0..nv).map(|k| (p_plus[k] - p_minus[k]) / (2.0 * h)).collect();
    let mut out = vec![0.0; nv];

    // dT/dq and dV/dq for true coordinates.
    let coord = |k: usize| if k < 3 { k } else { k + 1 };
    for k in (0..3).chain(6..nv) {
        let mut qp = q.to_vec();
        let mut qm = q.to_vec();
        qp[coord(k)] += h;
        qm[coord(k)] -= h;
        let dt_dq = (kinetic_energy(tree, &qp, v) - kinetic_energy(tree, &qm, v)) / (2.0 * h);
        let dv_dq = (potential_energy(tree, &qp, g) - potential_energy(tree, &qm, g)) / (2.0 * h);
        out[k] = dp[k] - dt_dq + dv_dq;
    }

    let p = momentum(tree, q, v);
    let lin = Vector3::new(p[0], p[1], p[2]);
    let v_o = Vector3::new(v[0], v[1], v[2]);
    let ps = poses(tree, q);
    let o = ps[tree.body_index(&tree.joints[0].child).unwrap()].origin;
    let mut grav_moment = Vector3::zeros();
    for (b, pose) in tree.bodies.iter().zip(&ps) {
        grav_moment += (pose.com - o).cross(&Vector3::new(0.0, 0.0, -b.mass * g));
    }
    let rot = Vector3::new(dp[3], dp[4], dp[5]) + v_o.cross(&lin) - grav_moment;
    out[3] = rot.x;
    out[4] = rot.y;
    out[5] = rot.z;
    out
}

/// Deterministic pseudo-random numbers for tests (SplitMix64).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn vec(&mut self, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| self.uniform(-scale, scale)).collect()
    }

    /// Random valid configuration: random pose, unit quaternion, joint angles.
    pub fn configuration(&mut self, tree: &KinematicTree, angle: f64) -> Vec<f64> {
        let mut q = vec![0.0; tree.nq];
        for k in 0..3 {
            q[k] = self.uniform(-1.0, 1.0);
        }
        let quat = UnitQuaternion::from_euler_angles(
            self.uniform(-3.0, 3.0),
            self.uniform(-1.5, 1.5),
            self.uniform(-3.0, 3.0),
        );
        q[3] = quat.w;
        q[4] = quat.i;
        q[5] = quat.j;
        q[6] = quat.k;
        for k in 7..tree.nq {
            q[k] = self.uniform(-angle, angle);
        }
        q
    }
}

/// Evaluates the library reward on oracle inputs.
pub fn library_reward(
    x: &reward_oracle::Inputs,
    cfg: &boardpush::rewards::RewardConfig,
    schedule: boardpush::gait::GaitSchedule,
) -> boardpush::rewards::RewardBreakdown {
    use boardpush::rewards::{total_reward, BodySignals, Command};
    let sig = BodySignals {
        v_deck_xy: [x.v_deck.x, x.v_deck.y],
        omega_deck_z: x.w_deck_z,
        omega_deck_xy: [x.w_deck_xy.x, x.w_deck_xy.y],
        v_right: [x.v_right.x, x.v_right.y, x.v_right.z],
        v_right_xy: [x.v_right.x, x.v_right.y],
        omega_right_xy: [x.w_right_xy.x, x.w_right_xy.y],
        v_com_xy: [x.v_com.x, x.v_com.y],
        omega_base_z: x.w_base_z,
        foot_force: x.force,
        foot_speed: x.speed,
        right_on_deck: x.on_deck,
    };
    let cmd = Command {
        v_x: x.cmd[0],
        v_y: x.cmd[1],
        yaw_rate: x.cmd[2],
    };
    let clock = boardpush::gait::GaitClock {
        phase_time: x.phase,
        schedule,
    };
    total_reward(&cmd, &sig, &clock, &x.a_prev, &x.a, &x.tau, cfg)
}

pub fn oracle_params(cfg: &boardpush::rewards::RewardConfig, s: &boardpush::gait::GaitSchedule) -> reward_oracle::Params {
    reward_oracle::Params {
        t_double: s.t_double,
        t_single: s.t_single,
        w: s.smooth_width,
        sigma: cfg.sigma,
        f_min: cfg.f_min,
        v_swing: cfg.v_swing_max,
    }
}
