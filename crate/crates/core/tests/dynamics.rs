mod common;

use boardpush::dynamics::{
    deck_lean, steer_angle, ContactMaterial, ContactPair, ExternalForces, SimState, World,
};
use boardpush::model::{build_robot_tree, build_skateboard_tree, JointKind, KinematicTree, ModelParams};
use common::TestRng;
use nalgebra::{DMatrix, Matrix3, UnitQuaternion, Vector3};

const DT: f64 = 0.002;

fn world() -> World {
    World::new(ModelParams::default(), ContactMaterial::default()).unwrap()
}

fn board_world() -> World {
    World::board_only(ModelParams::default(), ContactMaterial::default()).unwrap()
}

fn armature_diagonal(tree: &KinematicTree) -> Vec<f64> {
    let mut out = vec![0.0; 6];
    out.extend(
        tree.joints
            .iter()
            .filter(|j| j.kind == JointKind::Revolute)
            .map(|j| j.armature),
    );
    out
}

fn trees() -> Vec<KinematicTree> {
    let p = ModelParams::default();
    vec![build_robot_tree(&p).unwrap(), build_skateboard_tree(&p).unwrap()]
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

#[test]
fn mass_matrix_matches_impulse_momentum_oracle() {
    let w = world();
    let mut rng = TestRng::new(11);
    for (tree, art) in trees().iter().zip([&w.robot, &w.board]) {
        let arm = armature_diagonal(tree);
        for _ in 0..4 {
            let q = rng.configuration(tree, 0.8);
            let m = art.mass_matrix(&q).unwrap();
            let oracle = common::mass_matrix(tree, &q);
            let scale = max_abs(&m).max(1.0);
            for i in 0..tree.nv {
                for j in 0..tree.nv {
                    let expected = oracle[i][j] + if i == j { arm[i] } else { 0.0 };
                    let err = (m[(i, j)] - expected).abs();
                    assert!(err <= 1e-6 * scale, "{} M[{i},{j}] = {} vs {}", tree.name, m[(i, j)], expected);
                }
            }
        }
    }
}

#[test]
fn mass_matrix_is_symmetric_positive_definite() {
    let w = world();
    let mut rng = TestRng::new(12);
    for (tree, art) in trees().iter().zip([&w.robot, &w.board]) {
        for _ in 0..100 {
            let q = rng.configuration(tree, 2.0);
            let m = art.mass_matrix(&q).unwrap();
            assert!(max_abs(&(&m - m.transpose())) < 1e-10);
            let eig = m.symmetric_eigenvalues();
            assert!(eig.min() > 0.0, "{} min eigenvalue {}", tree.name, eig.min());
        }
    }
}

#[test]
fn bias_forces_match_lagrangian_oracle() {
    let w = world();
    let mut rng = TestRng::new(13);
    let g = 9.81;
    for (tree, art) in trees().iter().zip([&w.robot, &w.board]) {
        for _ in 0..4 {
            let q = rng.configuration(tree, 0.8);
            let v = rng.vec(tree.nv, 1.5);
            let b = art.bias_forces(&q, &v, &Vector3::new(0.0, 0.0, -g)).unwrap();
            let oracle = common::bias(tree, &q, &v, g);
            let scale = b.amax().max(1.0);
            for k in 0..tree.nv {
                assert!(
                    (b[k] - oracle[k]).abs() <= 1e-5 * scale,
                    "{} bias[{k}] = {} vs {}",
                    tree.name,
                    b[k],
                    oracle[k]
                );
            }
        }
    }
}

#[test]
fn bias_is_zero_at_rest_without_gravity() {
    let w = world();
    let mut rng = TestRng::new(14);
    let tree = &trees()[1];
    let q = rng.configuration(tree, 0.3);
    let b = w.board.bias_forces(&q, &vec![0.0; 8], &Vector3::zeros()).unwrap();
    assert_eq!(b.amax(), 0.0);
}

fn airborne_state(w: &World, rng: &mut TestRng) -> SimState {
    let mut s = w.board_rest_state();
    s.q_robot = rng.configuration(&build_robot_tree(&w.params).unwrap(), 0.3);
    s.q_robot[2] = 10.0;
    s.v_robot = rng.vec(18, 1.0);
    s.q_board = rng.configuration(&build_skateboard_tree(&w.params).unwrap(), 0.2);
    s.q_board[2] = 5.0;
    s.v_board = rng.vec(8, 1.0);
    s
}

#[test]
fn momentum_is_conserved_without_gravity_or_contacts() {
    let mut w = world();
    w.gravity = Vector3::zeros();
    let mut rng = TestRng::new(15);
    let mut s = airborne_state(&w, &mut rng);
    let h0 = w.robot.momentum_from(&w.robot.kinematics(&s.q_robot, &s.v_robot));
    let b0 = w.board.momentum_from(&w.board.kinematics(&s.q_board, &s.v_board));
    let zero = [0.0; 12];
    for _ in 0..1000 {
        s = w.step(&s, &zero, DT).unwrap();
        assert!(s.contact_cache.is_empty());
    }
    let h1 = w.robot.momentum_from(&w.robot.kinematics(&s.q_robot, &s.v_robot));
    let b1 = w.board.momentum_from(&w.board.kinematics(&s.q_board, &s.v_board));
    assert!((h1 - h0).norm() <= 1e-8 * h0.norm(), "robot drift {}", (h1 - h0).norm() / h0.norm());
    assert!((b1 - b0).norm() <= 1e-8 * b0.norm(), "board drift {}", (b1 - b0).norm() / b0.norm());
}

#[test]
fn free_space_translation_is_uniform() {
    let mut w = board_world();
    w.gravity = Vector3::zeros();
    let mut s = w.board_rest_state();
    s.q_board[2] = 3.0;
    s.v_board[0] = 0.7;
    s.v_board[1] = -0.2;
    s.v_board[2] = 0.1;
    let next = w.step(&s, &[], DT).unwrap();
    for k in 0..3 {
        assert!((next.q_board[k] - (s.q_board[k] + s.v_board[k] * DT)).abs() < 1e-14);
        assert!((next.v_board[k] - s.v_board[k]).abs() < 1e-12);
    }
}

fn spring_energy(w: &World, s: &SimState) -> f64 {
    let k = w.params.skateboard.truck_stiffness;
    w.truck_angles(s).iter().map(|a| 0.5 * k * a * a).sum()
}

#[test]
fn free_fall_energy_drift_is_small() {
    let mut params = ModelParams::default();
    params.skateboard.truck_damping = 0.0;
    let w = World::board_only(params, ContactMaterial::default()).unwrap();
    let mut s = w.board_rest_state();
    s.q_board[2] = 20.0;
    s.v_board[3] = 0.5;
    s.v_board[4] = -0.3;
    s.v_board[5] = 1.0;
    let e = |s: &SimState| w.board.energy(&s.q_board, &s.v_board, &w.gravity).unwrap() + spring_energy(&w, s);
    let e0 = e(&s);
    for _ in 0..500 {
        s = w.step(&s, &[], DT).unwrap();
    }
    let drift = (e(&s) - e0).abs() / e0.abs();
    assert!(drift < 1e-3, "relative drift {drift}");
}

#[test]
fn pure_rotation_energy_matches_rigid_body_formula() {
    let w = board_world();
    let tree = build_skateboard_tree(&w.params).unwrap();
    let mut q = w.board.neutral_q();
    q[2] = 1.0;
    let omega = Vector3::new(0.4, -1.1, 0.7);
    let mut v = vec![0.0; 8];
    v[3..6].copy_from_slice(omega.as_slice());
    // Locked inertia about the deck origin from the tree description.
    let poses = common::poses(&tree, &q);
    let o = poses[0].origin;
    let mut inertia = Matrix3::zeros();
    for (b, p) in tree.bodies.iter().zip(&poses) {
        let r = p.com - o;
        inertia += p.rot * b.inertia * p.rot.transpose()
            + b.mass * (Matrix3::identity() * r.norm_squared() - r * r.transpose());
    }
    let expected = 0.5 * omega.dot(&(inertia * omega));
    let e = w.board.energy(&q, &v, &Vector3::zeros()).unwrap();
    assert!((e - expected).abs() < 1e-9, "{e} vs {expected}");
}

#[test]
fn energy_is_zero_at_rest_at_datum() {
    let w = board_world();
    let q = w.board.neutral_q();
    assert_eq!(w.board.energy(&q, &[0.0; 8], &Vector3::zeros()).unwrap(), 0.0);
}

fn settle(w: &World, mut s: SimState, seconds: f64) -> SimState {
    for _ in 0..(seconds / DT).round() as usize {
        s = w.step(&s, &[], DT).unwrap();
    }
    s
}

#[test]
fn resting_wheel_penetration_matches_static_balance() {
    let w = board_world();
    let mut s = w.board_rest_state();
    s.q_board[2] += 0.005;
    let s = settle(&w, s, 2.0);
    let contacts = w.contact_detect(&s);
    assert_eq!(contacts.len(), 4);
    let mean = contacts.iter().map(|c| c.penetration).sum::<f64>() / 4.0;
    let expected = w.params.skateboard.total_mass() * 9.81 / (4.0 * w.material.k_c);
    assert!((mean / expected - 1.0).abs() < 0.05, "{mean} vs {expected}");
}

fn rolling_state(w: &World, v: Vector3<f64>) -> SimState {
    let mut s = w.board_rest_state();
    let pen = w.params.skateboard.total_mass() * 9.81 / (4.0 * w.material.k_c);
    s.q_board[2] -= pen;
    s.v_board[0] = v.x;
    s.v_board[1] = v.y;
    s
}

#[test]
fn forward_roll_keeps_most_of_its_speed() {
    let w = board_world();
    let s = settle(&w, rolling_state(&w, Vector3::new(0.5, 0.0, 0.0)), 2.0);
    let ratio = s.v_board[0] / 0.5;
    assert!(ratio > 0.9, "retained {ratio}");
}

#[test]
fn lateral_slide_dies_out() {
    let w = board_world();
    let s = settle(&w, rolling_state(&w, Vector3::new(0.0, 0.5, 0.0)), 2.0);
    let ratio = s.v_board[1].abs() / 0.5;
    assert!(ratio < 0.1, "retained {ratio}");
}

fn hold_lean(w: &World, s: &mut SimState, lean: f64) {
    let r = w.deck_rotation(s);
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    let q = UnitQuaternion::from_euler_angles(-lean, 0.0, yaw);
    s.q_board[3] = q.w;
    s.q_board[4] = q.i;
    s.q_board[5] = q.j;
    s.q_board[6] = q.k;
    s.v_board[3] = 0.0;
    s.v_board[4] = 0.0;
}

#[test]
fn leaning_deck_steers_toward_the_lean() {
    let w = board_world();
    for lean in [0.1, -0.1] {
        let mut s = rolling_state(&w, Vector3::new(0.5, 0.0, 0.0));
        hold_lean(&w, &mut s, lean);
        assert!((deck_lean(&w.deck_rotation(&s)) - lean).abs() < 1e-12);
        let mut yaw_rate = 0.0;
        for _ in 0..500 {
            s = w.step(&s, &[], DT).unwrap();
            hold_lean(&w, &mut s, lean);
            yaw_rate = s.v_board[5];
        }
        let r = w.deck_rotation(&s);
        let heading = Vector3::new(r[(0, 0)], r[(1, 0)], 0.0).normalize();
        let contacts = w.contact_detect(&s);
        let front = contacts
            .iter()
            .find(|c| c.pair == ContactPair::WheelGround && c.body.link != 0 && w.board.links[c.body.link].name.starts_with("front"))
            .expect("front wheel on the ground");
        let steer = heading.cross(&front.friction_frame[0]).z.atan2(heading.dot(&front.friction_frame[0]));
        let expected = if lean > 0.0 { 0.0708 } else { -0.0708 };
        assert!((steer - expected).abs() < 1e-4, "steer {steer}");
        assert!((steer - steer_angle(lean, w.params.skateboard.truck_rake)).abs() < 1e-12);
        assert_eq!(yaw_rate.signum(), lean.signum(), "yaw rate {yaw_rate}");
    }
}

#[test]
fn step_is_bit_deterministic() {
    let w = world();
    let mut rng = TestRng::new(16);
    let s = airborne_state(&w, &mut rng);
    let tau: Vec<f64> = rng.vec(12, 50.0);
    let a = w.step(&s, &tau, DT).unwrap();
    let b = w.step(&s, &tau, DT).unwrap();
    let bits = |s: &SimState| {
        s.q_robot
            .iter()
            .chain(&s.v_robot)
            .chain(&s.q_board)
            .chain(&s.v_board)
            .map(|x| x.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn right_sole_pressed_into_deck_contacts_the_grip_tape() {
    let w = world();
    let mut s = w.board_rest_state();
    s.q_robot = w.robot.neutral_q();
    let foot = w.foot_link(boardpush::dynamics::Foot::Right);
    let kin = w.robot.positions(&s.q_robot);
    let sole = kin.to_world(foot, &w.sole_center());
    let top = w.params.skateboard.deck_top_height();
    s.q_robot[0] -= sole.x;
    s.q_robot[1] -= sole.y;
    s.q_robot[2] += top - 0.001 - sole.z;
    let contacts: Vec<_> = w
        .contact_detect(&s)
        .into_iter()
        .filter(|c| c.pair != ContactPair::WheelGround)
        .collect();
    assert!(!contacts.is_empty());
    for c in &contacts {
        assert_eq!(c.pair, ContactPair::FootDeck);
        assert_eq!(c.mu, [w.params.friction.deck_foot; 2]);
        assert!((c.penetration - 0.001).abs() < 1e-12);
    }
}

#[test]
fn contact_frames_are_orthonormal_while_rolling() {
    let w = board_world();
    let mut s = rolling_state(&w, Vector3::new(0.5, 0.1, 0.0));
    hold_lean(&w, &mut s, 0.05);
    for c in w.contact_detect(&s) {
        assert!(c.penetration >= 0.0);
        let [t1, t2] = c.friction_frame;
        assert!(c.normal.dot(&t1).abs() < 1e-12 && c.normal.dot(&t2).abs() < 1e-12);
        assert!(t1.dot(&t2).abs() < 1e-12);
        assert!((t1.norm() - 1.0).abs() < 1e-12 && (t2.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn external_forces_push_the_deck() {
    let mut w = board_world();
    w.gravity = Vector3::zeros();
    let mut s = w.board_rest_state();
    s.q_board[2] = 2.0;
    let mut f = vec![0.0; 8];
    f[0] = w.params.skateboard.total_mass();
    let ext = ExternalForces {
        robot: None,
        board: Some(f),
    };
    for _ in 0..100 {
        s = w.step_with(&s, &[], DT, &ext).unwrap();
    }
    let kin = w.board.kinematics(&s.q_board, &s.v_board);
    assert!((w.board.com_velocity(&kin).x - 0.2).abs() < 1e-9);
}

