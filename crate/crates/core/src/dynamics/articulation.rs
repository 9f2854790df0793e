//! Joint-space dynamics of a floating-base tree.
//!
//! Generalized velocities of the root are the world-frame linear velocity of
//! the root origin followed by the world-frame angular velocity. Positions
//! of the root are `[x, y, z, qw, qx, qy, qz]`. All kinematic quantities are
//! expressed in the world frame.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, UnitQuaternion, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::model::{validate_tree, JointKind, KinematicTree};

#[derive(Debug, Clone, PartialEq)]
pub enum JointModel {
    Free,
    Revolute { axis: Vector3<f64>, origin: Vector3<f64> },
}

#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    pub joint_name: String,
    pub parent: Option<usize>,
    pub joint: JointModel,
    pub q_index: usize,
    pub v_index: usize,
    pub mass: f64,
    pub com: Vector3<f64>,
    pub inertia: Matrix3<f64>,
    pub stiffness: f64,
    pub damping: f64,
    pub armature: f64,
    pub limits: Option<[f64; 2]>,
    pub actuated: bool,
}

/// A validated tree compiled into topological order with coordinate indices.
#[derive(Debug, Clone)]
pub struct Articulation {
    pub name: String,
    pub links: Vec<Link>,
    pub nq: usize,
    pub nv: usize,
    pub total_mass: f64,
    /// Revolute link indices on the path from the root to each link, inclusive.
    chains: Vec<Vec<usize>>,
}

/// Kinematic state of every link for one `(q, v)`.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub rot: Vec<Matrix3<f64>>,
    pub origin: Vec<Vector3<f64>>,
    pub com: Vec<Vector3<f64>>,
    /// Joint axis in world frame (zero for the root).
    pub axis: Vec<Vector3<f64>>,
    pub inertia: Vec<Matrix3<f64>>,
    pub omega: Vec<Vector3<f64>>,
    pub vel_origin: Vec<Vector3<f64>>,
    pub vel_com: Vec<Vector3<f64>>,
    /// Link accelerations at zero generalized acceleration.
    pub omega_dot_bias: Vec<Vector3<f64>>,
    pub acc_com_bias: Vec<Vector3<f64>>,
}

impl Kinematics {
    pub fn point_velocity(&self, link: usize, x: &Vector3<f64>) -> Vector3<f64> {
        self.vel_origin[link] + self.omega[link].cross(&(x - self.origin[link]))
    }

    pub fn to_world(&self, link: usize, local: &Vector3<f64>) -> Vector3<f64> {
        self.origin[link] + self.rot[link] * local
    }
}

pub fn root_quaternion(q: &[f64]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[3], q[4], q[5], q[6]))
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    v.cross_matrix()
}

impl Articulation {
    pub fn new(tree: &KinematicTree) -> Result<Self> {
        let diagnostics = validate_tree(tree);
        if !diagnostics.is_empty() {
            return Err(Error::InvalidTree {
                tree: tree.name.clone(),
                diagnostics,
            });
        }
        let root = tree
            .joints
            .iter()
            .position(|j| j.kind == JointKind::Free6)
            .expect("validated tree has a root");

        // Depth-first preorder, children visited in joint-list order.
        let mut order = Vec::with_capacity(tree.joints.len());
        let mut stack = vec![(root, None::<usize>)];
        while let Some((ji, parent_link)) = stack.pop() {
            let link_index = order.len();
            order.push((ji, parent_link));
            let child = &tree.joints[ji].child;
            let children: Vec<usize> = tree
                .joints
                .iter()
                .enumerate()
                .filter(|(_, j)| j.parent.as_deref() == Some(child.as_str()))
                .map(|(i, _)| i)
                .collect();
            for &c in children.iter().rev() {
                stack.push((c, Some(link_index)));
            }
        }

        let mut links = Vec::with_capacity(order.len());
        let (mut qi, mut vi) = (0, 0);
        for &(ji, parent) in &order {
            let j = &tree.joints[ji];
            let body = &tree.bodies[tree.body_index(&j.child).expect("validated")];
            let joint = match j.kind {
                JointKind::Free6 => JointModel::Free,
                JointKind::Revolute => JointModel::Revolute {
                    axis: j.axis,
                    origin: j.origin,
                },
            };
            let (dq, dv) = match j.kind {
                JointKind::Free6 => (7, 6),
                JointKind::Revolute => (1, 1),
            };
            links.push(Link {
                name: body.name.clone(),
                joint_name: j.name.clone(),
                parent,
                joint,
                q_index: qi,
                v_index: vi,
                mass: body.mass,
                com: body.com_offset,
                inertia: body.inertia,
                stiffness: j.stiffness,
                damping: j.damping,
                armature: j.armature,
                limits: j.limits,
                actuated: j.actuated,
            });
            qi += dq;
            vi += dv;
        }

        let mut chains: Vec<Vec<usize>> = Vec::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            let mut chain = l.parent.map(|p| chains[p].clone()).unwrap_or_default();
            if matches!(l.joint, JointModel::Revolute { .. }) {
                chain.push(i);
            }
            chains.push(chain);
        }

        Ok(Self {
            name: tree.name.clone(),
            total_mass: links.iter().map(|l| l.mass).sum(),
            links,
            nq: qi,
            nv: vi,
            chains,
        })
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn joint_link_index(&self, joint_name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.joint_name == joint_name)
    }

    /// Velocity indices of actuated joints, in link order.
    pub fn actuated_v_indices(&self) -> Vec<usize> {
        self.links.iter().filter(|l| l.actuated).map(|l| l.v_index).collect()
    }

    pub fn revolute_links(&self) -> impl Iterator<Item = (usize, &Link)> {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l.joint, JointModel::Revolute { .. }))
    }

    /// Neutral configuration: identity root orientation, zero joint angles.
    pub fn neutral_q(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.nq];
        q[3] = 1.0;
        q
    }

    pub fn check_q(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.nq {
            return Err(Error::NonFinite(format!(
                "{}: q has length {}, expected {}",
                self.name,
                q.len(),
                self.nq
            )));
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("{}: configuration", self.name)));
        }
        Ok(())
    }

    pub fn check_v(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.nv || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("{}: velocity", self.name)));
        }
        Ok(())
    }

    /// Forward kinematics with velocities and zero-acceleration bias terms.
    pub fn kinematics(&self, q: &[f64], v: &[f64]) -> Kinematics {
        let n = self.links.len();
        let mut k = Kinematics {
            rot: Vec::with_capacity(n),
            origin: Vec::with_capacity(n),
            com: Vec::with_capacity(n),
            axis: Vec::with_capacity(n),
            inertia: Vec::with_capacity(n),
            omega: Vec::with_capacity(n),
            vel_origin: Vec::with_capacity(n),
            vel_com: Vec::with_capacity(n),
            omega_dot_bias: Vec::with_capacity(n),
            acc_com_bias: Vec::with_capacity(n),
        };
        let mut acc_origin: Vec<Vector3<f64>> = Vec::with_capacity(n);

        for l in &self.links {
            let (rot, origin, axis, omega, vel_o, wdot, acc_o);
            match (&l.joint, l.parent) {
                (JointModel::Free, _) => {
                    let qi = l.q_index;
                    let vi = l.v_index;
                    rot = root_quaternion(&q[qi..qi + 7]).to_rotation_matrix().into_inner();
                    origin = Vector3::new(q[qi], q[qi + 1], q[qi + 2]);
                    axis = Vector3::zeros();
                    vel_o = Vector3::new(v[vi], v[vi + 1], v[vi + 2]);
                    omega = Vector3::new(v[vi + 3], v[vi + 4], v[vi + 5]);
                    wdot = Vector3::zeros();
                    acc_o = Vector3::zeros();
                }
                (JointModel::Revolute { axis: a, origin: r }, Some(p)) => {
                    let theta = q[l.q_index];
                    let rate = v[l.v_index];
                    let local = nalgebra::Rotation3::from_axis_angle(
                        &nalgebra::Unit::new_unchecked(*a),
                        theta,
                    );
                    rot = k.rot[p] * local.matrix();
                    origin = k.origin[p] + k.rot[p] * r;
                    axis = k.rot[p] * a;
                    let wp = k.omega[p];
                    let arm = origin - k.origin[p];
                    omega = wp + axis * rate;
                    vel_o = k.vel_origin[p] + wp.cross(&arm);
                    wdot = k.omega_dot_bias[p] + wp.cross(&(axis * rate));
                    acc_o = acc_origin[p] + k.omega_dot_bias[p].cross(&arm) + wp.cross(&wp.cross(&arm));
                }
                (JointModel::Revolute { .. }, None) => unreachable!("revolute root rejected by validation"),
            }
            let com = origin + rot * l.com;
            let rc = com - origin;
            k.vel_com.push(vel_o + omega.cross(&rc));
            k.acc_com_bias.push(acc_o + wdot.cross(&rc) + omega.cross(&omega.cross(&rc)));
            k.inertia.push(rot * l.inertia * rot.transpose());
            k.rot.push(rot);
            k.origin.push(origin);
            k.com.push(com);
            k.axis.push(axis);
            k.omega.push(omega);
            k.vel_origin.push(vel_o);
            k.omega_dot_bias.push(wdot);
            acc_origin.push(acc_o);
        }
        k
    }

    pub fn positions(&self, q: &[f64]) -> Kinematics {
        self.kinematics(q, &vec![0.0; self.nv])
    }

    /// Nonzero columns of the world-frame Jacobian of point `x` fixed to `link`.
    pub fn point_jacobian(&self, kin: &Kinematics, link: usize, x: &Vector3<f64>) -> Vec<(usize, Vector3<f64>)> {
        let chain = &self.chains[link];
        let mut cols = Vec::with_capacity(6 + chain.len());
        let r = x - kin.origin[0];
        for k in 0..3 {
            cols.push((k, Vector3::ith(k, 1.0)));
        }
        for k in 0..3 {
            cols.push((3 + k, Vector3::<f64>::ith(k, 1.0).cross(&r)));
        }
        for &j in chain {
            cols.push((self.links[j].v_index, kin.axis[j].cross(&(x - kin.origin[j]))));
        }
        cols
    }

    /// Adds the generalized force of a world force `f` applied at point `x` on `link`.
    pub fn add_point_force(&self, kin: &Kinematics, link: usize, x: &Vector3<f64>, f: &Vector3<f64>, gen: &mut [f64]) {
        let r = x - kin.origin[0];
        let m = r.cross(f);
        for k in 0..3 {
            gen[k] += f[k];
            gen[3 + k] += m[k];
        }
        for &j in &self.chains[link] {
            gen[self.links[j].v_index] += kin.axis[j].dot(&(x - kin.origin[j]).cross(f));
        }
    }

    /// Joint-space inertia matrix, including joint armature.
    pub fn mass_matrix_from(&self, kin: &Kinematics) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nv, self.nv);
        let mut cols: Vec<(usize, Vector3<f64>, Vector3<f64>)> = Vec::with_capacity(12);
        for (i, l) in self.links.iter().enumerate() {
            cols.clear();
            let c = kin.com[i];
            let r = c - kin.origin[0];
            for k in 0..3 {
                cols.push((k, Vector3::zeros(), Vector3::ith(k, 1.0)));
            }
            for k in 0..3 {
                let e = Vector3::<f64>::ith(k, 1.0);
                cols.push((3 + k, e, e.cross(&r)));
            }
            for &j in &self.chains[i] {
                let s = kin.axis[j];
                cols.push((self.links[j].v_index, s, s.cross(&(c - kin.origin[j]))));
            }
            let inertia = &kin.inertia[i];
            for a in 0..cols.len() {
                let (ia, wa, va) = cols[a];
                let iwa = inertia * wa;
                for b in a..cols.len() {
                    let (ib, wb, vb) = cols[b];
                    let val = l.mass * va.dot(&vb) + iwa.dot(&wb);
                    m[(ia, ib)] += val;
                    if ia != ib {
                        m[(ib, ia)] += val;
                    }
                }
            }
        }
        for l in &self.links {
            if l.armature > 0.0 {
                m[(l.v_index, l.v_index)] += l.armature;
            }
        }
        m
    }

    pub fn mass_matrix(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        self.check_q(q)?;
        Ok(self.mass_matrix_from(&self.positions(q)))
    }

    /// Coriolis, centrifugal and gravity generalized forces, with the sign
    /// convention `M a = tau + f_ext - bias`.
    pub fn bias_from(&self, kin: &Kinematics, gravity: &Vector3<f64>) -> DVector<f64> {
        let n = self.links.len();
        let mut force = vec![Vector3::zeros(); n];
        let mut moment = vec![Vector3::zeros(); n];
        for i in 0..n {
            let l = &self.links[i];
            let f = l.mass * (kin.acc_com_bias[i] - gravity);
            let iw = kin.inertia[i] * kin.omega[i];
            let t = kin.inertia[i] * kin.omega_dot_bias[i] + kin.omega[i].cross(&iw);
            force[i] = f;
            moment[i] = t + kin.com[i].cross(&f);
        }
        self.project_subtree_wrenches(kin, force, moment)
    }

    /// Accumulates per-link wrenches (force, moment about the world origin)
    /// over subtrees and projects them onto the joint axes.
    fn project_subtree_wrenches(
        &self,
        kin: &Kinematics,
        mut force: Vec<Vector3<f64>>,
        mut moment: Vec<Vector3<f64>>,
    ) -> DVector<f64> {
        let mut out = DVector::zeros(self.nv);
        for i in (0..self.links.len()).rev() {
            let l = &self.links[i];
            match l.joint {
                JointModel::Free => {
                    let m0 = moment[i] - kin.origin[i].cross(&force[i]);
                    for k in 0..3 {
                        out[l.v_index + k] = force[i][k];
                        out[l.v_index + 3 + k] = m0[k];
                    }
                }
                JointModel::Revolute { .. } => {
                    out[l.v_index] = kin.axis[i].dot(&(moment[i] - kin.origin[i].cross(&force[i])));
                }
            }
            if let Some(p) = l.parent {
                let (f, m) = (force[i], moment[i]);
                force[p] += f;
                moment[p] += m;
            }
        }
        out
    }

    pub fn bias_forces(&self, q: &[f64], v: &[f64], gravity: &Vector3<f64>) -> Result<DVector<f64>> {
        self.check_q(q)?;
        self.check_v(v)?;
        if gravity.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gravity".into()));
        }
        Ok(self.bias_from(&self.kinematics(q, v), gravity))
    }

    pub fn kinetic_energy_from(&self, kin: &Kinematics) -> f64 {
        let mut t = 0.0;
        for (i, l) in self.links.iter().enumerate() {
            t += 0.5 * l.mass * kin.vel_com[i].norm_squared()
                + 0.5 * kin.omega[i].dot(&(kin.inertia[i] * kin.omega[i]));
        }
        t
    }

    pub fn potential_energy_from(&self, kin: &Kinematics, gravity: &Vector3<f64>) -> f64 {
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| -l.mass * gravity.dot(&kin.com[i]))
            .sum()
    }

    /// Kinetic plus gravitational potential energy (datum at z = 0).
    pub fn energy(&self, q: &[f64], v: &[f64], gravity: &Vector3<f64>) -> Result<f64> {
        self.check_q(q)?;
        self.check_v(v)?;
        let kin = self.kinematics(q, v);
        Ok(self.kinetic_energy_from(&kin) + self.potential_energy_from(&kin, gravity))
    }

    /// Linear momentum and angular momentum about the world origin.
    pub fn momentum_from(&self, kin: &Kinematics) -> Vector6<f64> {
        let mut p = Vector3::zeros();
        let mut l = Vector3::zeros();
        for (i, link) in self.links.iter().enumerate() {
            let pi = link.mass * kin.vel_com[i];
            p += pi;
            l += kin.com[i].cross(&pi) + kin.inertia[i] * kin.omega[i];
        }
        Vector6::new(p.x, p.y, p.z, l.x, l.y, l.z)
    }

    pub fn center_of_mass(&self, kin: &Kinematics) -> Vector3<f64> {
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| l.mass * kin.com[i])
            .sum::<Vector3<f64>>()
            / self.total_mass
    }

    pub fn com_velocity(&self, kin: &Kinematics) -> Vector3<f64> {
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| l.mass * kin.vel_com[i])
            .sum::<Vector3<f64>>()
            / self.total_mass
    }

    /// Map from root velocity `(u, w)` to momentum about the world origin with
    /// all joints locked.
    pub fn locked_momentum_matrix(&self, kin: &Kinematics) -> Matrix6<f64> {
        let o = kin.origin[0];
        let mass = self.total_mass;
        let mut first = Vector3::zeros();
        let mut inertia_o = Matrix3::zeros();
        for (i, l) in self.links.iter().enumerate() {
            let r = kin.com[i] - o;
            first += l.mass * r;
            inertia_o += kin.inertia[i] + l.mass * (Matrix3::identity() * r.norm_squared() - r * r.transpose());
        }
        let cbar = o + first / mass;
        let mut a = Matrix6::zeros();
        a.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * mass));
        a.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(&first)));
        a.fixed_view_mut::<3, 3>(3, 0).copy_from(&(mass * skew(&cbar)));
        a.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(inertia_o - skew(&o) * skew(&first)));
        a
    }

    /// Semi-implicit position update: root translation, world-frame
    /// quaternion exponential, and joint angles.
    pub fn integrate(&self, q: &[f64], v: &[f64], dt: f64) -> Vec<f64> {
        let mut out = q.to_vec();
        for l in &self.links {
            match l.joint {
                JointModel::Free => {
                    let (qi, vi) = (l.q_index, l.v_index);
                    for k in 0..3 {
                        out[qi + k] += v[vi + k] * dt;
                    }
                    let w = Vector3::new(v[vi + 3], v[vi + 4], v[vi + 5]);
                    let quat = UnitQuaternion::from_scaled_axis(w * dt) * root_quaternion(&q[qi..qi + 7]);
                    let quat = UnitQuaternion::new_normalize(*quat.quaternion());
                    out[qi + 3] = quat.w;
                    out[qi + 4] = quat.i;
                    out[qi + 5] = quat.j;
                    out[qi + 6] = quat.k;
                }
                JointModel::Revolute { .. } => out[l.q_index] += v[l.v_index] * dt,
            }
        }
        out
    }
}

pub fn set_root_pose(q: &mut [f64], position: Vector3<f64>, orientation: UnitQuaternion<f64>) {
    q[0] = position.x;
    q[1] = position.y;
    q[2] = position.z;
    q[3] = orientation.w;
    q[4] = orientation.i;
    q[5] = orientation.j;
    q[6] = orientation.k;
}
