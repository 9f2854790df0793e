//! Second, separately written evaluator of the reward terms. It does not
//! call `boardpush::rewards` or `boardpush::gait`.

use nalgebra::{Vector2, Vector3};

pub struct Inputs {
    pub cmd: [f64; 3],
    pub v_deck: Vector2<f64>,
    pub w_deck_z: f64,
    pub w_deck_xy: Vector2<f64>,
    pub v_right: Vector3<f64>,
    pub w_right_xy: Vector2<f64>,
    pub v_com: Vector2<f64>,
    pub w_base_z: f64,
    pub force: [f64; 2],
    pub speed: [f64; 2],
    pub on_deck: bool,
    pub phase: f64,
    pub a_prev: Vec<f64>,
    pub a: Vec<f64>,
    pub tau: Vec<f64>,
}

pub struct Params {
    pub t_double: f64,
    pub t_single: f64,
    pub w: f64,
    pub sigma: f64,
    pub f_min: f64,
    pub v_swing: f64,
}

/// Left-foot expected contact as the lesser of a rising and a falling ramp
/// measured from the start of the rising transition.
pub fn left_contact(p: &Params, phase: f64) -> f64 {
    let cycle = p.t_double + p.t_single;
    if p.w == 0.0 {
        return if phase < p.t_double { 1.0 } else { 0.0 };
    }
    let u = (phase + p.w).rem_euclid(cycle);
    let rise = (u / (2.0 * p.w)).min(1.0);
    let fall = ((p.t_double + 2.0 * p.w - u) / (2.0 * p.w)).clamp(0.0, 1.0);
    rise.min(fall)
}

/// Unweighted terms, same order as the published list followed by the base set.
pub fn terms(x: &Inputs, p: &Params) -> [f64; 11] {
    let cmd_xy = Vector2::new(x.cmd[0], x.cmd[1]);
    let r1 = f64::exp(-(cmd_xy - x.v_deck).norm_squared() / p.sigma);
    let r2 = f64::exp(-((x.cmd[2] - x.w_deck_z) * (x.cmd[2] - x.w_deck_z)) / p.sigma);
    let r3 = if x.on_deck { x.v_right.dot(&x.v_right) } else { 0.0 };
    let rel = x.v_deck - x.v_right.xy();
    let r4 = rel.dot(&rel);
    let relw = x.w_deck_xy - x.w_right_xy;
    let r5 = relw.dot(&relw);
    let com = f64::exp(-(cmd_xy - x.v_com).norm_squared() / p.sigma);
    let yaw = f64::exp(-((x.cmd[2] - x.w_base_z) * (x.cmd[2] - x.w_base_z)) / p.sigma);
    let expected = [left_contact(p, x.phase), 1.0];
    let mut periodic = 0.0;
    for k in 0..2 {
        let loaded = x.force[k] > p.f_min;
        let mut stance = 0.0;
        if loaded {
            stance = expected[k];
        }
        let mut swing = 0.0;
        if !loaded && x.speed[k] < p.v_swing {
            swing = 1.0 - expected[k];
        }
        periodic += stance + swing;
    }
    let mut rate = 0.0;
    for i in 0..x.a.len() {
        rate += (x.a[i] - x.a_prev[i]) * (x.a[i] - x.a_prev[i]);
    }
    let mut torque = 0.0;
    for t in &x.tau {
        torque += t * t;
    }
    [r1, r2, r3, r4, r5, com, yaw, periodic, rate, torque, 1.0]
}

/// Random inputs spanning tracking errors, contact states and phases.
pub fn random_inputs(rng: &mut super::TestRng, cycle: f64) -> Inputs {
    let mut v2 = |s: f64| Vector2::new(rng.uniform(-s, s), rng.uniform(-s, s));
    let v_deck = v2(1.2);
    let w_deck_xy = v2(2.0);
    let w_right_xy = v2(2.0);
    let v_com = v2(1.2);
    let mut x = Inputs {
        cmd: [0.0; 3],
        v_deck,
        w_deck_z: 0.0,
        w_deck_xy,
        v_right: Vector3::zeros(),
        w_right_xy,
        v_com,
        w_base_z: 0.0,
        force: [0.0; 2],
        speed: [0.0; 2],
        on_deck: false,
        phase: 0.0,
        a_prev: Vec::new(),
        a: Vec::new(),
        tau: Vec::new(),
    };
    x.cmd = [rng.uniform(0.0, 1.0), 0.0, 0.0];
    x.w_deck_z = rng.uniform(-2.0, 2.0);
    x.v_right = Vector3::new(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.0, 1.0));
    x.w_base_z = rng.uniform(-2.0, 2.0);
    x.force = [rng.uniform(0.0, 60.0), rng.uniform(0.0, 60.0)];
    x.speed = [rng.uniform(0.0, 0.5), rng.uniform(0.0, 0.5)];
    x.on_deck = rng.uniform(0.0, 1.0) < 0.5;
    x.phase = rng.uniform(0.0, cycle);
    x.a_prev = rng.vec(12, 1.0);
    x.a = rng.vec(12, 1.0);
    x.tau = rng.vec(12, 150.0);
    x
}
