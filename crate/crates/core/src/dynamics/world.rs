use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::articulation::{root_quaternion, Articulation, JointModel, Kinematics};
use super::contact::{
    contact_damping, contact_force, ActiveContact, BodyRef, ContactMaterial, ContactPair, Foot, TreeId, Wrench,
};
use crate::error::{Error, Result};
use crate::model::{build_robot_tree, build_skateboard_tree, ModelParams, Shape};

pub const GRAVITY: f64 = 9.81;
/// Soft joint-limit stiffness, N m/rad, and damping, N m s/rad.
const LIMIT_STIFFNESS: f64 = 1000.0;
const LIMIT_DAMPING: f64 = 10.0;
/// Foot corners deeper than this below the deck top are not in deck contact.
const DECK_CONTACT_DEPTH: f64 = 0.04;

/// Generalized state of both trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub q_robot: Vec<f64>,
    pub v_robot: Vec<f64>,
    pub q_board: Vec<f64>,
    pub v_board: Vec<f64>,
    pub t: f64,
    /// Contacts used to produce this state (detected at the previous state).
    pub contact_cache: Vec<ActiveContact>,
}

impl SimState {
    pub fn check_invariants(&self) -> Result<()> {
        for (name, q) in [("robot", &self.q_robot), ("board", &self.q_board)] {
            let n = (q[3] * q[3] + q[4] * q[4] + q[5] * q[5] + q[6] * q[6]).sqrt();
            if (n - 1.0).abs() >= 1e-9 {
                return Err(Error::NonFinite(format!("{name} root quaternion norm {n}")));
            }
        }
        let finite = self
            .q_robot
            .iter()
            .chain(&self.v_robot)
            .chain(&self.q_board)
            .chain(&self.v_board)
            .all(|x| x.is_finite());
        if !finite || !(self.t >= 0.0) {
            return Err(Error::NonFinite("state".into()));
        }
        Ok(())
    }
}

/// Additional generalized forces, e.g. for test rigs or the deck-only task.
/// Root rows are a world force and a world moment about the root origin.
#[derive(Debug, Clone, Default)]
pub struct ExternalForces {
    pub robot: Option<Vec<f64>>,
    pub board: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct Wheel {
    link: usize,
    center: Vector3<f64>,
    radius: f64,
    front: bool,
}

#[derive(Debug, Clone)]
struct Layout {
    feet: [(Foot, usize); 2],
    sole_corners: [Vector3<f64>; 4],
    deck_half: [f64; 3],
    wheels: Vec<Wheel>,
}

/// Wheel steer for a deck lean `lean` on trucks raked at `rake`:
/// `atan(sin(rake) tan(lean))`. The front truck turns by `+steer`, the rear
/// by `-steer`, so the board yaws toward the side it leans to.
pub fn steer_angle(lean: f64, rake: f64) -> f64 {
    (rake.sin() * lean.tan()).atan()
}

/// Truck centering torque: linear spring plus viscous damping.
pub fn truck_torque(angle: f64, rate: f64, stiffness: f64, damping: f64) -> f64 {
    -stiffness * angle - damping * rate
}

/// Deck lean toward its left (+y) side, rad.
pub fn deck_lean(rot: &Matrix3<f64>) -> f64 {
    -(rot[(2, 1)]).atan2(rot[(2, 2)])
}

/// Robot and skateboard with the contact model and integrator.
#[derive(Debug, Clone)]
pub struct World {
    pub params: ModelParams,
    pub material: ContactMaterial,
    pub gravity: Vector3<f64>,
    pub robot: Articulation,
    pub board: Articulation,
    /// When false the robot is frozen and excluded from contacts.
    pub robot_active: bool,
    actuated: Vec<usize>,
    layout: Layout,
}

impl World {
    pub fn new(params: ModelParams, material: ContactMaterial) -> Result<Self> {
        params.validate()?;
        material.validate()?;
        let robot = Articulation::new(&build_robot_tree(&params)?)?;
        let board_tree = build_skateboard_tree(&params)?;
        let board = Articulation::new(&board_tree)?;

        let r = &params.robot;
        let (hl, hw) = (0.5 * r.foot_length, 0.5 * r.foot_width);
        let sole_corners = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .map(|(sx, sy)| Vector3::new(r.foot_forward + sx * hl, sy * hw, -r.foot_height));
        let feet = [
            (Foot::Left, robot.link_index("left_foot").expect("robot has feet")),
            (Foot::Right, robot.link_index("right_foot").expect("robot has feet")),
        ];
        let mut wheels = Vec::new();
        for b in &board_tree.bodies {
            for g in &b.geometry {
                if let Shape::Sphere { radius } = g.shape {
                    wheels.push(Wheel {
                        link: board.link_index(&b.name).expect("compiled"),
                        center: g.offset,
                        radius,
                        front: b.name.starts_with("front"),
                    });
                }
            }
        }
        let s = &params.skateboard;
        let layout = Layout {
            feet,
            sole_corners,
            deck_half: [0.5 * s.deck_length, 0.5 * s.deck_width, 0.5 * s.deck_thickness],
            wheels,
        };
        Ok(Self {
            actuated: robot.actuated_v_indices(),
            params,
            material,
            gravity: Vector3::new(0.0, 0.0, -GRAVITY),
            robot,
            board,
            robot_active: true,
            layout,
        })
    }

    pub fn board_only(params: ModelParams, material: ContactMaterial) -> Result<Self> {
        let mut w = Self::new(params, material)?;
        w.robot_active = false;
        Ok(w)
    }

    pub fn foot_link(&self, foot: Foot) -> usize {
        self.layout.feet.iter().find(|(f, _)| *f == foot).expect("two feet").1
    }

    pub fn sole_corners(&self) -> &[Vector3<f64>; 4] {
        &self.layout.sole_corners
    }

    /// Sole center in the foot frame.
    pub fn sole_center(&self) -> Vector3<f64> {
        let r = &self.params.robot;
        Vector3::new(r.foot_forward, 0.0, -r.foot_height)
    }

    pub fn actuated_indices(&self) -> &[usize] {
        &self.actuated
    }

    /// Deck resting on unloaded wheels at the origin, robot frozen far away.
    pub fn board_rest_state(&self) -> SimState {
        let mut q_board = self.board.neutral_q();
        q_board[2] = self.params.skateboard.rest_deck_height();
        let mut q_robot = self.robot.neutral_q();
        q_robot[2] = 10.0;
        SimState {
            q_robot,
            v_robot: vec![0.0; self.robot.nv],
            q_board,
            v_board: vec![0.0; self.board.nv],
            t: 0.0,
            contact_cache: Vec::new(),
        }
    }

    pub fn kinematics(&self, state: &SimState) -> (Kinematics, Kinematics) {
        (
            self.robot.kinematics(&state.q_robot, &state.v_robot),
            self.board.kinematics(&state.q_board, &state.v_board),
        )
    }

    pub fn contact_detect(&self, state: &SimState) -> Vec<ActiveContact> {
        let (kr, kb) = self.kinematics(state);
        self.detect(self.robot_active.then_some(&kr), &kb)
    }

    fn detect(&self, kr: Option<&Kinematics>, kb: &Kinematics) -> Vec<ActiveContact> {
        let mut out = Vec::new();
        let f = &self.params.friction;
        let deck = 0;
        let deck_rot = kb.rot[deck];
        let deck_o = kb.origin[deck];
        let [hx, hy, hz] = self.layout.deck_half;

        if let Some(kr) = kr {
            for &(foot, link) in &self.layout.feet {
                for corner in &self.layout.sole_corners {
                    let x = kr.to_world(link, corner);
                    let vel = kr.point_velocity(link, &x);
                    let body = BodyRef {
                        tree: TreeId::Robot,
                        link,
                    };
                    if x.z < 0.0 {
                        out.push(ActiveContact {
                            pair: ContactPair::FootGround,
                            point: x,
                            normal: Vector3::z(),
                            penetration: -x.z,
                            rel_velocity: vel,
                            friction_frame: [Vector3::x(), Vector3::y()],
                            mu: [f.ground_foot; 2],
                            body,
                            other: None,
                            foot: Some(foot),
                        });
                    }
                    if foot != Foot::Right {
                        continue;
                    }
                    let local = deck_rot.transpose() * (x - deck_o);
                    let pen = hz - local.z;
                    if local.x.abs() <= hx && local.y.abs() <= hy && pen > 0.0 && pen < DECK_CONTACT_DEPTH {
                        out.push(ActiveContact {
                            pair: ContactPair::FootDeck,
                            point: x,
                            normal: deck_rot.column(2).into_owned(),
                            penetration: pen,
                            rel_velocity: vel - kb.point_velocity(deck, &x),
                            friction_frame: [deck_rot.column(0).into_owned(), deck_rot.column(1).into_owned()],
                            mu: [f.deck_foot; 2],
                            body,
                            other: Some(BodyRef {
                                tree: TreeId::Board,
                                link: deck,
                            }),
                            foot: Some(foot),
                        });
                    }
                }
            }
        }

        let heading = Vector3::new(deck_rot[(0, 0)], deck_rot[(1, 0)], 0.0);
        let heading = if heading.norm() > 1e-9 {
            heading.normalize()
        } else {
            Vector3::x()
        };
        let steer = steer_angle(deck_lean(&deck_rot), self.params.skateboard.truck_rake);
        for w in &self.layout.wheels {
            let c = kb.to_world(w.link, &w.center);
            let pen = w.radius - c.z;
            if pen <= 0.0 {
                continue;
            }
            let yaw = if w.front { steer } else { -steer };
            let t1 = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw) * heading;
            let t2 = Vector3::z().cross(&t1);
            let x = Vector3::new(c.x, c.y, 0.0);
            out.push(ActiveContact {
                pair: ContactPair::WheelGround,
                point: x,
                normal: Vector3::z(),
                penetration: pen,
                rel_velocity: kb.point_velocity(w.link, &x),
                friction_frame: [t1, t2],
                mu: [f.wheel_rolling, f.wheel_lateral],
                body: BodyRef {
                    tree: TreeId::Board,
                    link: w.link,
                },
                other: None,
                foot: None,
            });
        }
        out
    }

    pub fn contact_forces(&self, contacts: &[ActiveContact]) -> Vec<Wrench> {
        contacts.iter().map(|c| contact_force(c, &self.material)).collect()
    }

    pub fn step(&self, state: &SimState, torques: &[f64], dt: f64) -> Result<SimState> {
        self.step_with(state, torques, dt, &ExternalForces::default())
    }

    /// Semi-implicit Euler step. Contact damping, friction and joint
    /// spring-dampers are linearized and treated implicitly in the velocity
    /// update; the root velocities are then corrected so that each tree's
    /// momentum matches the applied external impulse.
    pub fn step_with(&self, state: &SimState, torques: &[f64], dt: f64, ext: &ExternalForces) -> Result<SimState> {
        if !(dt > 0.0 && dt <= 0.01) {
            return Err(Error::InvalidParameter {
                field: "dt".into(),
                reason: format!("must lie in (0, 0.01], got {dt}"),
            });
        }
        let active = self.robot_active;
        if active && (torques.len() != self.actuated.len() || torques.iter().any(|t| !t.is_finite())) {
            return Err(Error::NonFinite(format!(
                "actuator torques (expected {} finite values)",
                self.actuated.len()
            )));
        }
        self.robot.check_q(&state.q_robot)?;
        self.board.check_q(&state.q_board)?;
        self.robot.check_v(&state.v_robot)?;
        self.board.check_v(&state.v_board)?;

        let kr = self.robot.kinematics(&state.q_robot, &state.v_robot);
        let kb = self.board.kinematics(&state.q_board, &state.v_board);
        let contacts = self.detect(active.then_some(&kr), &kb);

        let nr = if active { self.robot.nv } else { 0 };
        let nb = self.board.nv;
        let n = nr + nb;
        let mut sys = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        // External generalized forces per tree (contacts and user forces).
        let mut ext_r = vec![0.0; self.robot.nv];
        let mut ext_b = vec![0.0; nb];

        if active {
            let m = self.robot.mass_matrix_from(&kr);
            sys.view_mut((0, 0), (nr, nr)).copy_from(&m);
            let bias = self.robot.bias_from(&kr, &self.gravity);
            for i in 0..nr {
                rhs[i] -= dt * bias[i];
            }
            for (k, &vi) in self.actuated.iter().enumerate() {
                rhs[vi] += dt * torques[k];
            }
            if let Some(f) = &ext.robot {
                for (e, x) in ext_r.iter_mut().zip(f) {
                    *e += x;
                }
            }
        }
        {
            let m = self.board.mass_matrix_from(&kb);
            sys.view_mut((nr, nr), (nb, nb)).copy_from(&m);
            let bias = self.board.bias_from(&kb, &self.gravity);
            for i in 0..nb {
                rhs[nr + i] -= dt * bias[i];
            }
            if let Some(f) = &ext.board {
                for (e, x) in ext_b.iter_mut().zip(f) {
                    *e += x;
                }
            }
        }

        // Joint springs, dampers and soft limits, implicit in velocity.
        if active {
            add_joint_terms(&self.robot, &state.q_robot, &state.v_robot, 0, dt, &mut sys, &mut rhs);
        }
        add_joint_terms(&self.board, &state.q_board, &state.v_board, nr, dt, &mut sys, &mut rhs);

        // Contacts.
        let mut implicit = DMatrix::<f64>::zeros(n, n);
        for c in &contacts {
            let w = contact_force(c, &self.material);
            debug_assert!(w.normal_force >= 0.0, "unilateral contact pulled");
            let mut cols = self.jacobian_cols(&kr, &kb, nr, c.body, &c.point, 1.0);
            if let Some(other) = c.other {
                cols.extend(self.jacobian_cols(&kr, &kb, nr, other, &c.point, -1.0));
            }
            self.apply_force(&kr, &kb, c.body, &c.point, &w.force, &mut ext_r, &mut ext_b);
            if let Some(other) = c.other {
                self.apply_force(&kr, &kb, other, &c.point, &(-w.force), &mut ext_r, &mut ext_b);
            }
            let d = contact_damping(c, &self.material, w.normal_force);
            if d.amax() == 0.0 {
                continue;
            }
            let dcols: Vec<(usize, Vector3<f64>)> = cols.iter().map(|(i, j)| (*i, d * j)).collect();
            for (ia, ja) in &cols {
                for (ib, djb) in &dcols {
                    implicit[(*ia, *ib)] += dt * ja.dot(djb);
                }
            }
        }
        for i in 0..nr {
            rhs[i] += dt * ext_r[i];
        }
        for i in 0..nb {
            rhs[nr + i] += dt * ext_b[i];
        }
        sys += &implicit;

        let snapshot = || Box::new(serde_json::to_value(state).unwrap_or(serde_json::Value::Null));
        let chol = sys.cholesky().ok_or_else(|| Error::Diverged {
            t: state.t,
            reason: "system matrix not positive definite".into(),
            snapshot: snapshot(),
        })?;
        let dv = chol.solve(&rhs);
        if dv.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged {
                t: state.t,
                reason: "non-finite acceleration".into(),
                snapshot: snapshot(),
            });
        }
        let implicit_impulse = &implicit * &dv;

        let mut next = state.clone();
        if active {
            let v_new: Vec<f64> = (0..nr).map(|i| state.v_robot[i] + dv[i]).collect();
            let (q, v) = self.advance_tree(
                &self.robot,
                &kr,
                &state.q_robot,
                v_new,
                &ext_r,
                &implicit_impulse.as_slice()[0..nr],
                dt,
            );
            next.q_robot = q;
            next.v_robot = v;
        }
        let v_new: Vec<f64> = (0..nb).map(|i| state.v_board[i] + dv[nr + i]).collect();
        let (q, v) = self.advance_tree(
            &self.board,
            &kb,
            &state.q_board,
            v_new,
            &ext_b,
            &implicit_impulse.as_slice()[nr..n],
            dt,
        );
        next.q_board = q;
        next.v_board = v;
        next.t = state.t + dt;
        next.contact_cache = contacts;

        if next.check_invariants().is_err() {
            return Err(Error::Diverged {
                t: state.t,
                reason: "successor state violates invariants".into(),
                snapshot: snapshot(),
            });
        }
        Ok(next)
    }

    #[allow(clippy::too_many_arguments)]
    fn advance_tree(
        &self,
        art: &Articulation,
        kin: &Kinematics,
        q: &[f64],
        mut v_new: Vec<f64>,
        ext: &[f64],
        implicit_impulse: &[f64],
        dt: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        // Momentum about the world origin expected after this step.
        let o = kin.origin[0];
        let com = art.center_of_mass(kin);
        let weight = art.total_mass * self.gravity;
        let force = Vector3::new(ext[0], ext[1], ext[2]) + weight
            - Vector3::new(implicit_impulse[0], implicit_impulse[1], implicit_impulse[2]) / dt;
        let moment_o = Vector3::new(ext[3], ext[4], ext[5]) + (com - o).cross(&weight)
            - Vector3::new(implicit_impulse[3], implicit_impulse[4], implicit_impulse[5]) / dt;
        let dp = dt * force;
        let dl = dt * moment_o + o.cross(&dp);
        let target = art.momentum_from(kin) + Vector6::new(dp.x, dp.y, dp.z, dl.x, dl.y, dl.z);

        let q_new = art.integrate(q, &v_new, dt);
        for x in v_new.iter_mut().take(6) {
            *x = 0.0;
        }
        let kin_joint = art.kinematics(&q_new, &v_new);
        let residual = target - art.momentum_from(&kin_joint);
        let a = art.locked_momentum_matrix(&kin_joint);
        if let Some(root) = a.lu().solve(&residual) {
            v_new[..6].copy_from_slice(root.as_slice());
        }
        (q_new, v_new)
    }

    fn jacobian_cols(
        &self,
        kr: &Kinematics,
        kb: &Kinematics,
        nr: usize,
        body: BodyRef,
        x: &Vector3<f64>,
        sign: f64,
    ) -> Vec<(usize, Vector3<f64>)> {
        match body.tree {
            TreeId::Robot => self
                .robot
                .point_jacobian(kr, body.link, x)
                .into_iter()
                .map(|(i, c)| (i, sign * c))
                .collect(),
            TreeId::Board => self
                .board
                .point_jacobian(kb, body.link, x)
                .into_iter()
                .map(|(i, c)| (nr + i, sign * c))
                .collect(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_force(
        &self,
        kr: &Kinematics,
        kb: &Kinematics,
        body: BodyRef,
        x: &Vector3<f64>,
        f: &Vector3<f64>,
        ext_r: &mut [f64],
        ext_b: &mut [f64],
    ) {
        match body.tree {
            TreeId::Robot => self.robot.add_point_force(kr, body.link, x, f, ext_r),
            TreeId::Board => self.board.add_point_force(kb, body.link, x, f, ext_b),
        }
    }

    /// Truck joint angles `[front, rear]`.
    pub fn truck_angles(&self, state: &SimState) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, name) in ["front_truck", "rear_truck"].iter().enumerate() {
            if let Some(l) = self.board.joint_link_index(name) {
                out[i] = state.q_board[self.board.links[l].q_index];
            }
        }
        out
    }

    pub fn deck_rotation(&self, state: &SimState) -> Matrix3<f64> {
        root_quaternion(&state.q_board[0..7]).to_rotation_matrix().into_inner()
    }

    /// Revolute joint angles of the robot in actuator order.
    pub fn joint_positions(&self, state: &SimState) -> Vec<f64> {
        self.robot
            .links
            .iter()
            .filter(|l| l.actuated && matches!(l.joint, JointModel::Revolute { .. }))
            .map(|l| state.q_robot[l.q_index])
            .collect()
    }

    pub fn joint_velocities(&self, state: &SimState) -> Vec<f64> {
        self.actuated.iter().map(|&i| state.v_robot[i]).collect()
    }
}

fn add_joint_terms(
    art: &Articulation,
    q: &[f64],
    v: &[f64],
    offset: usize,
    dt: f64,
    sys: &mut DMatrix<f64>,
    rhs: &mut DVector<f64>,
) {
    for (_, l) in art.revolute_links() {
        let theta = q[l.q_index];
        let rate = v[l.v_index];
        let mut k = l.stiffness;
        let mut b = l.damping;
        let mut tau = truck_torque(theta, rate, l.stiffness, l.damping);
        if let Some([lo, hi]) = l.limits {
            let over = if theta > hi {
                theta - hi
            } else if theta < lo {
                theta - lo
            } else {
                0.0
            };
            if over != 0.0 {
                k += LIMIT_STIFFNESS;
                b += LIMIT_DAMPING;
                tau += -LIMIT_STIFFNESS * over - LIMIT_DAMPING * rate;
            }
        }
        let i = offset + l.v_index;
        rhs[i] += dt * tau - dt * dt * k * rate;
        sys[(i, i)] += dt * b + dt * dt * k;
    }
}
