//! Kinematic trees for the reduced humanoid and the skateboard.
//!
//! Both trees use the same joint convention: a joint sits at `origin` in the
//! parent body frame, and a revolute joint rotates the child frame about
//! `axis` (expressed in the parent frame) so that at zero angle the child
//! frame is aligned with the parent frame. The root joint of each tree is a
//! six-DoF free joint with a quaternion orientation.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MODEL_SCHEMA: u32 = 1;

/// Names of the six leg joints, ordered from hip to ankle.
pub const LEG_JOINTS: [&str; 6] = [
    "hip_yaw",
    "hip_roll",
    "hip_pitch",
    "knee_pitch",
    "ankle_pitch",
    "ankle_roll",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
    Capsule { radius: f64, half_length: f64 },
}

/// Collision primitive attached to a body. Boxes and capsules are
/// axis-aligned in the body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geom {
    pub name: String,
    #[serde(flatten)]
    pub shape: Shape,
    pub offset: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub name: String,
    pub mass: f64,
    /// Inertia about the center of mass, body frame.
    pub inertia: Matrix3<f64>,
    pub com_offset: Vector3<f64>,
    pub geometry: Vec<Geom>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Free6,
    Revolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub axis: Vector3<f64>,
    /// `None` for the root joint (attached to the world).
    pub parent: Option<String>,
    pub child: String,
    /// Joint position in the parent frame.
    pub origin: Vector3<f64>,
    pub limits: Option<[f64; 2]>,
    pub stiffness: f64,
    pub damping: f64,
    /// Reflected rotor inertia added to the joint's diagonal mass entry.
    pub armature: f64,
    pub actuated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicTree {
    pub name: String,
    pub bodies: Vec<BodySpec>,
    pub joints: Vec<JointSpec>,
    pub nq: usize,
    pub nv: usize,
}

impl KinematicTree {
    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    pub fn actuated_joints(&self) -> impl Iterator<Item = &JointSpec> {
        self.joints.iter().filter(|j| j.actuated)
    }

    pub fn count_kind(&self, kind: JointKind) -> usize {
        self.joints.iter().filter(|j| j.kind == kind).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    pub pelvis_mass: f64,
    pub pelvis_half_extents: [f64; 3],
    /// Arms, torso and head, held fixed and lumped into the pelvis body.
    pub torso_mass: f64,
    pub torso_com: [f64; 3],
    pub torso_half_extents: [f64; 3],
    /// Left hip joint position in the pelvis frame; the right hip mirrors y.
    pub hip_offset: [f64; 3],
    pub hip_link_mass: f64,
    pub thigh_length: f64,
    pub thigh_mass: f64,
    pub shank_length: f64,
    pub shank_mass: f64,
    pub ankle_link_mass: f64,
    pub foot_mass: f64,
    pub foot_length: f64,
    pub foot_width: f64,
    /// Vertical distance from the ankle axes to the sole.
    pub foot_height: f64,
    /// Forward offset of the sole center from the ankle.
    pub foot_forward: f64,
    /// `[lo, hi]` per entry of [`LEG_JOINTS`], shared by both legs.
    pub joint_limits: [[f64; 2]; 6],
    pub torque_limits: [f64; 6],
    pub joint_armature: f64,
    pub joint_damping: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            pelvis_mass: 12.0,
            pelvis_half_extents: [0.1, 0.15, 0.08],
            torso_mass: 44.6,
            torso_com: [0.0, 0.0, 0.3],
            torso_half_extents: [0.12, 0.2, 0.3],
            hip_offset: [0.0, 0.1, -0.1],
            hip_link_mass: 1.0,
            thigh_length: 0.38,
            thigh_mass: 5.0,
            shank_length: 0.38,
            shank_mass: 3.0,
            ankle_link_mass: 0.5,
            foot_mass: 1.2,
            foot_length: 0.22,
            foot_width: 0.12,
            foot_height: 0.08,
            foot_forward: 0.03,
            joint_limits: [
                [-0.6, 0.6],
                [-0.5, 0.5],
                [-1.8, 0.8],
                [0.0, 2.4],
                [-1.0, 0.8],
                [-0.5, 0.5],
            ],
            torque_limits: [100.0, 150.0, 150.0, 200.0, 100.0, 60.0],
            joint_armature: 0.05,
            joint_damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkateboardParams {
    pub deck_mass: f64,
    pub deck_length: f64,
    pub deck_width: f64,
    pub deck_thickness: f64,
    pub wheelbase: f64,
    /// Truck pivot axis inclination from horizontal, rad.
    pub truck_rake: f64,
    pub truck_stiffness: f64,
    pub truck_damping: f64,
    /// Symmetric travel limit of the truck joints, rad.
    pub truck_limit: f64,
    /// Hanger plus two wheels, lumped.
    pub hanger_mass: f64,
    /// Pivot-to-axle drop.
    pub truck_height: f64,
    /// Lateral distance between the two wheel centers of one truck.
    pub wheel_track: f64,
    pub wheel_radius: f64,
}

impl Default for SkateboardParams {
    fn default() -> Self {
        Self {
            deck_mass: 2.5,
            deck_length: 0.8,
            deck_width: 0.2,
            deck_thickness: 0.015,
            wheelbase: 0.44,
            truck_rake: std::f64::consts::FRAC_PI_4,
            truck_stiffness: 20.0,
            truck_damping: 0.5,
            truck_limit: 0.35,
            hanger_mass: 0.8,
            truck_height: 0.06,
            wheel_track: 0.2,
            wheel_radius: 0.027,
        }
    }
}

impl SkateboardParams {
    /// Height of the deck frame origin above the ground with unloaded wheels.
    pub fn rest_deck_height(&self) -> f64 {
        self.wheel_radius + self.truck_height + 0.5 * self.deck_thickness
    }

    pub fn deck_top_height(&self) -> f64 {
        self.rest_deck_height() + 0.5 * self.deck_thickness
    }

    pub fn total_mass(&self) -> f64 {
        self.deck_mass + 2.0 * self.hanger_mass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrictionParams {
    pub ground_foot: f64,
    /// Grip tape; must exceed `ground_foot`.
    pub deck_foot: f64,
    pub wheel_lateral: f64,
    pub wheel_rolling: f64,
}

impl Default for FrictionParams {
    fn default() -> Self {
        Self {
            ground_foot: 0.8,
            deck_foot: 1.2,
            wheel_lateral: 0.9,
            wheel_rolling: 0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub schema: u32,
    pub robot: RobotParams,
    pub skateboard: SkateboardParams,
    pub friction: FrictionParams,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            schema: MODEL_SCHEMA,
            robot: RobotParams::default(),
            skateboard: SkateboardParams::default(),
            friction: FrictionParams::default(),
        }
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {value}")))
    }
}

fn non_negative(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be non-negative, got {value}")))
    }
}

impl ModelParams {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let params: ModelParams = serde_json::from_str(text).map_err(|e| Error::Config {
            field: "model".into(),
            reason: e.to_string(),
        })?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate_robot(&self) -> Result<()> {
        let r = &self.robot;
        positive("robot.pelvis_mass", r.pelvis_mass)?;
        positive("robot.torso_mass", r.torso_mass)?;
        positive("robot.hip_link_mass", r.hip_link_mass)?;
        positive("robot.thigh_length", r.thigh_length)?;
        positive("robot.thigh_mass", r.thigh_mass)?;
        positive("robot.shank_length", r.shank_length)?;
        positive("robot.shank_mass", r.shank_mass)?;
        positive("robot.ankle_link_mass", r.ankle_link_mass)?;
        positive("robot.foot_mass", r.foot_mass)?;
        positive("robot.foot_length", r.foot_length)?;
        positive("robot.foot_width", r.foot_width)?;
        positive("robot.foot_height", r.foot_height)?;
        non_negative("robot.joint_armature", r.joint_armature)?;
        non_negative("robot.joint_damping", r.joint_damping)?;
        for (i, e) in r.pelvis_half_extents.iter().enumerate() {
            positive(&format!("robot.pelvis_half_extents[{i}]"), *e)?;
        }
        for (i, e) in r.torso_half_extents.iter().enumerate() {
            positive(&format!("robot.torso_half_extents[{i}]"), *e)?;
        }
        for (i, [lo, hi]) in r.joint_limits.iter().enumerate() {
            if !(lo < hi) {
                return Err(invalid(
                    format!("robot.joint_limits[{i}]"),
                    format!("{} requires lo < hi, got [{lo}, {hi}]", LEG_JOINTS[i]),
                ));
            }
        }
        for (i, t) in r.torque_limits.iter().enumerate() {
            positive(&format!("robot.torque_limits[{i}]"), *t)?;
        }
        Ok(())
    }

    pub fn validate_skateboard(&self) -> Result<()> {
        let s = &self.skateboard;
        positive("skateboard.deck_mass", s.deck_mass)?;
        positive("skateboard.deck_length", s.deck_length)?;
        positive("skateboard.deck_width", s.deck_width)?;
        positive("skateboard.deck_thickness", s.deck_thickness)?;
        positive("skateboard.wheelbase", s.wheelbase)?;
        positive("skateboard.truck_stiffness", s.truck_stiffness)?;
        non_negative("skateboard.truck_damping", s.truck_damping)?;
        positive("skateboard.truck_limit", s.truck_limit)?;
        positive("skateboard.hanger_mass", s.hanger_mass)?;
        positive("skateboard.truck_height", s.truck_height)?;
        positive("skateboard.wheel_track", s.wheel_track)?;
        positive("skateboard.wheel_radius", s.wheel_radius)?;
        if !(s.truck_rake > 0.0 && s.truck_rake < FRAC_PI_2) {
            return Err(invalid(
                "skateboard.truck_rake",
                format!("must lie in (0, pi/2), got {}", s.truck_rake),
            ));
        }
        if s.wheelbase >= s.deck_length {
            return Err(invalid("skateboard.wheelbase", "must be shorter than the deck"));
        }
        Ok(())
    }

    pub fn validate_friction(&self) -> Result<()> {
        let f = &self.friction;
        positive("friction.ground_foot", f.ground_foot)?;
        positive("friction.deck_foot", f.deck_foot)?;
        positive("friction.wheel_lateral", f.wheel_lateral)?;
        positive("friction.wheel_rolling", f.wheel_rolling)?;
        if f.deck_foot <= f.ground_foot {
            return Err(invalid(
                "friction.deck_foot",
                format!(
                    "grip tape friction {} must exceed foot-ground friction {}",
                    f.deck_foot, f.ground_foot
                ),
            ));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != MODEL_SCHEMA {
            return Err(invalid(
                "schema",
                format!("unsupported schema {}, expected {MODEL_SCHEMA}", self.schema),
            ));
        }
        self.validate_robot()?;
        self.validate_skateboard()?;
        self.validate_friction()
    }

    /// Total configured robot mass (pelvis, lumped upper body, both legs).
    pub fn robot_mass(&self) -> f64 {
        let r = &self.robot;
        r.pelvis_mass
            + r.torso_mass
            + 2.0
                * (2.0 * r.hip_link_mass
                    + r.thigh_mass
                    + r.shank_mass
                    + r.ankle_link_mass
                    + r.foot_mass)
    }
}

/// Solid cuboid inertia about its center.
pub fn box_inertia(mass: f64, half: [f64; 3]) -> Matrix3<f64> {
    let [a, b, c] = half.map(|h| 2.0 * h);
    Matrix3::from_diagonal(&Vector3::new(
        mass * (b * b + c * c) / 12.0,
        mass * (a * a + c * c) / 12.0,
        mass * (a * a + b * b) / 12.0,
    ))
}

fn shift_inertia(inertia: &Matrix3<f64>, mass: f64, r: &Vector3<f64>) -> Matrix3<f64> {
    inertia + mass * (Matrix3::identity() * r.norm_squared() - r * r.transpose())
}

fn revolute(
    name: String,
    axis: Vector3<f64>,
    parent: &str,
    child: &str,
    origin: Vector3<f64>,
    limits: Option<[f64; 2]>,
) -> JointSpec {
    JointSpec {
        name,
        kind: JointKind::Revolute,
        axis,
        parent: Some(parent.to_string()),
        child: child.to_string(),
        origin,
        limits,
        stiffness: 0.0,
        damping: 0.0,
        armature: 0.0,
        actuated: false,
    }
}

fn free_root(name: &str, child: &str) -> JointSpec {
    JointSpec {
        name: name.to_string(),
        kind: JointKind::Free6,
        axis: Vector3::zeros(),
        parent: None,
        child: child.to_string(),
        origin: Vector3::zeros(),
        limits: None,
        stiffness: 0.0,
        damping: 0.0,
        armature: 0.0,
        actuated: false,
    }
}

fn finish_tree(name: &str, bodies: Vec<BodySpec>, joints: Vec<JointSpec>) -> Result<KinematicTree> {
    let revolute = joints.iter().filter(|j| j.kind == JointKind::Revolute).count();
    let tree = KinematicTree {
        name: name.to_string(),
        bodies,
        joints,
        nq: 7 + revolute,
        nv: 6 + revolute,
    };
    let diagnostics = validate_tree(&tree);
    if diagnostics.is_empty() {
        Ok(tree)
    } else {
        Err(Error::InvalidTree {
            tree: name.to_string(),
            diagnostics,
        })
    }
}

/// Builds the reduced humanoid: a floating pelvis carrying the lumped upper
/// body, and two six-joint legs. Left leg joints precede right leg joints.
pub fn build_robot_tree(params: &ModelParams) -> Result<KinematicTree> {
    params.validate_robot()?;
    let r = &params.robot;

    let torso_com = Vector3::from(r.torso_com);
    let pelvis_total = r.pelvis_mass + r.torso_mass;
    let com = torso_com * (r.torso_mass / pelvis_total);
    let pelvis_inertia = shift_inertia(&box_inertia(r.pelvis_mass, r.pelvis_half_extents), r.pelvis_mass, &(-com))
        + shift_inertia(
            &box_inertia(r.torso_mass, r.torso_half_extents),
            r.torso_mass,
            &(torso_com - com),
        );

    let mut bodies = vec![BodySpec {
        name: "pelvis".into(),
        mass: pelvis_total,
        inertia: pelvis_inertia,
        com_offset: com,
        geometry: vec![Geom {
            name: "pelvis_box".into(),
            shape: Shape::Box {
                half_extents: r.pelvis_half_extents,
            },
            offset: Vector3::zeros(),
        }],
    }];
    let mut joints = vec![free_root("root", "pelvis")];

    let axes = [
        Vector3::z(),
        Vector3::x(),
        Vector3::y(),
        Vector3::y(),
        Vector3::y(),
        Vector3::x(),
    ];
    let link_half = 0.04;
    let sole_box_height = 0.04;

    for (side, sign) in [("left", 1.0), ("right", -1.0)] {
        let hip = Vector3::new(r.hip_offset[0], sign * r.hip_offset[1], r.hip_offset[2]);
        let origins = [
            hip,
            Vector3::zeros(),
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, -r.thigh_length),
            Vector3::new(0.0, 0.0, -r.shank_length),
            Vector3::zeros(),
        ];
        let links = [
            ("hip_yaw_link", r.hip_link_mass, Vector3::zeros(), [0.03; 3]),
            ("hip_roll_link", r.hip_link_mass, Vector3::zeros(), [0.03; 3]),
            (
                "thigh",
                r.thigh_mass,
                Vector3::new(0.0, 0.0, -0.5 * r.thigh_length),
                [link_half, link_half, 0.5 * r.thigh_length],
            ),
            (
                "shank",
                r.shank_mass,
                Vector3::new(0.0, 0.0, -0.5 * r.shank_length),
                [link_half, link_half, 0.5 * r.shank_length],
            ),
            ("ankle_link", r.ankle_link_mass, Vector3::zeros(), [0.02; 3]),
            (
                "foot",
                r.foot_mass,
                Vector3::new(r.foot_forward, 0.0, -0.5 * r.foot_height),
                [0.5 * r.foot_length, 0.5 * r.foot_width, 0.5 * r.foot_height],
            ),
        ];
        let mut parent = "pelvis".to_string();
        for k in 0..6 {
            let (link, mass, com, half) = &links[k];
            let body_name = format!("{side}_{link}");
            let geometry = if *link == "foot" {
                vec![Geom {
                    name: format!("{side}_sole"),
                    shape: Shape::Box {
                        half_extents: [0.5 * r.foot_length, 0.5 * r.foot_width, 0.5 * sole_box_height],
                    },
                    offset: Vector3::new(
                        r.foot_forward,
                        0.0,
                        -r.foot_height + 0.5 * sole_box_height,
                    ),
                }]
            } else {
                Vec::new()
            };
            bodies.push(BodySpec {
                name: body_name.clone(),
                mass: *mass,
                inertia: box_inertia(*mass, *half),
                com_offset: *com,
                geometry,
            });
            let mut joint = revolute(
                format!("{side}_{}", LEG_JOINTS[k]),
                axes[k],
                &parent,
                &body_name,
                origins[k],
                Some(r.joint_limits[k]),
            );
            joint.actuated = true;
            joint.armature = r.joint_armature;
            joint.damping = r.joint_damping;
            joints.push(joint);
            parent = body_name;
        }
    }

    finish_tree("robot", bodies, joints)
}

/// Builds the skateboard: a floating deck with a spring-loaded raked truck
/// at each end. Each hanger carries two spherical wheel contacts.
pub fn build_skateboard_tree(params: &ModelParams) -> Result<KinematicTree> {
    params.validate_skateboard()?;
    let s = &params.skateboard;
    let deck_half = [0.5 * s.deck_length, 0.5 * s.deck_width, 0.5 * s.deck_thickness];

    let mut bodies = vec![BodySpec {
        name: "deck".into(),
        mass: s.deck_mass,
        inertia: box_inertia(s.deck_mass, deck_half),
        com_offset: Vector3::zeros(),
        geometry: vec![Geom {
            name: "deck_box".into(),
            shape: Shape::Box {
                half_extents: deck_half,
            },
            offset: Vector3::zeros(),
        }],
    }];
    let mut joints = vec![free_root("root", "deck")];

    let (sin_l, cos_l) = s.truck_rake.sin_cos();
    for (end, sign) in [("front", 1.0), ("rear", -1.0)] {
        let hanger = format!("{end}_hanger");
        let axle = Vector3::new(0.0, 0.0, -s.truck_height);
        bodies.push(BodySpec {
            name: hanger.clone(),
            mass: s.hanger_mass,
            inertia: box_inertia(s.hanger_mass, [0.025, 0.5 * s.wheel_track, 0.025]),
            com_offset: axle,
            geometry: [("left", 1.0), ("right", -1.0)]
                .iter()
                .map(|(w, ys)| Geom {
                    name: format!("{end}_{w}_wheel"),
                    shape: Shape::Sphere {
                        radius: s.wheel_radius,
                    },
                    offset: axle + Vector3::new(0.0, ys * 0.5 * s.wheel_track, 0.0),
                })
                .collect(),
        });
        let mut joint = revolute(
            format!("{end}_truck"),
            Vector3::new(-sign * cos_l, 0.0, sin_l),
            "deck",
            &hanger,
            Vector3::new(sign * 0.5 * s.wheelbase, 0.0, -0.5 * s.deck_thickness),
            Some([-s.truck_limit, s.truck_limit]),
        );
        joint.stiffness = s.truck_stiffness;
        joint.damping = s.truck_damping;
        joints.push(joint);
    }

    finish_tree("skateboard", bodies, joints)
}

fn symmetric_positive_definite(m: &Matrix3<f64>) -> bool {
    if (m - m.transpose()).amax() > 1e-9 * m.amax().max(1.0) {
        return false;
    }
    // Sylvester's criterion on leading minors.
    let d1 = m[(0, 0)];
    let d2 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    d1 > 0.0 && d2 > 0.0 && m.determinant() > 0.0
}

/// Checks every structural and physical invariant of a tree. Returns one
/// diagnostic per violation; an empty list means the tree is valid.
pub fn validate_tree(tree: &KinematicTree) -> Vec<String> {
    let mut out = Vec::new();

    let mut body_ids: HashMap<&str, usize> = HashMap::new();
    for (i, b) in tree.bodies.iter().enumerate() {
        if body_ids.insert(b.name.as_str(), i).is_some() {
            out.push(format!("duplicate body {}", b.name));
        }
        if !(b.mass.is_finite() && b.mass > 0.0) {
            out.push(format!("body {}: mass must be positive, got {}", b.name, b.mass));
        }
        if b.inertia.iter().any(|x| !x.is_finite()) || !symmetric_positive_definite(&b.inertia) {
            out.push(format!("body {}: inertia not symmetric positive-definite", b.name));
        }
        if b.com_offset.iter().any(|x| !x.is_finite()) {
            out.push(format!("body {}: non-finite com offset", b.name));
        }
    }

    let mut roots = 0;
    let mut parent_joint: HashMap<&str, usize> = HashMap::new();
    for (ji, j) in tree.joints.iter().enumerate() {
        match j.kind {
            JointKind::Free6 => {
                if j.stiffness != 0.0 || j.actuated {
                    out.push(format!("joint {}: free joint must be passive with zero stiffness", j.name));
                }
                if j.parent.is_some() {
                    out.push(format!("joint {}: free joint must attach to the world", j.name));
                } else {
                    roots += 1;
                }
            }
            JointKind::Revolute => {
                let n = j.axis.norm();
                if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
                    out.push(format!("joint {}: revolute axis not unit-norm (|axis| = {n})", j.name));
                }
                if j.parent.is_none() {
                    out.push(format!("joint {}: revolute joint without parent body", j.name));
                }
                if let Some([lo, hi]) = j.limits {
                    if !(lo < hi) {
                        out.push(format!("joint {}: limits require lo < hi, got [{lo}, {hi}]", j.name));
                    }
                }
            }
        }
        if !(j.stiffness >= 0.0 && j.damping >= 0.0 && j.armature >= 0.0) {
            out.push(format!("joint {}: stiffness, damping and armature must be non-negative", j.name));
        }
        if let Some(p) = &j.parent {
            if !body_ids.contains_key(p.as_str()) {
                out.push(format!("joint {}: unknown parent body {p}", j.name));
            }
        }
        if !body_ids.contains_key(j.child.as_str()) {
            out.push(format!("joint {}: unknown child body {}", j.name, j.child));
        }
        if parent_joint.insert(j.child.as_str(), ji).is_some() {
            out.push(format!("body {}: attached by more than one joint", j.child));
        }
    }
    if roots != 1 {
        out.push(format!("tree has {roots} free root joints, expected exactly 1"));
    }
    for b in &tree.bodies {
        if !parent_joint.contains_key(b.name.as_str()) {
            out.push(format!("body {}: not attached by any joint", b.name));
        }
    }

    // Walk parent chains; a chain that returns to its starting joint is a cycle.
    let mut on_cycle = vec![false; tree.joints.len()];
    for start in 0..tree.joints.len() {
        if on_cycle[start] {
            continue;
        }
        let mut ji = start;
        let mut path = vec![start];
        for _ in 0..=tree.joints.len() {
            let Some(parent) = tree.joints[ji].parent.as_deref() else { break };
            let Some(&next) = parent_joint.get(parent) else { break };
            if next == start {
                for &p in &path {
                    on_cycle[p] = true;
                }
                out.push(format!("cycle at joint {}", tree.joints[start].name));
                break;
            }
            if path.contains(&next) {
                break;
            }
            path.push(next);
            ji = next;
        }
    }

    let revolute = tree.count_kind(JointKind::Revolute);
    if tree.nv != 6 + revolute {
        out.push(format!("nv = {} but expected {}", tree.nv, 6 + revolute));
    }
    if tree.nq != 7 + revolute {
        out.push(format!("nq = {} but expected {}", tree.nq, 7 + revolute));
    }
    out
}
