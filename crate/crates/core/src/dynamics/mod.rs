//! Articulated rigid-body dynamics, compliant contact and time stepping.

mod articulation;
mod contact;
mod world;

pub use articulation::{root_quaternion, set_root_pose, Articulation, JointModel, Kinematics, Link};
pub use contact::{
    contact_damping, contact_force, ActiveContact, BodyRef, ContactMaterial, ContactPair, Foot, TreeId, Wrench,
};
pub use world::{deck_lean, steer_angle, truck_torque, ExternalForces, SimState, World, GRAVITY};
