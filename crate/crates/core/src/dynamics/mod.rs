//! Planar multibody leg with tendons, contact and end stops.

pub mod chain;
pub mod contact;
pub mod leg;
pub mod sim;

pub use chain::{Chain, Frames, JointSpec, LinkSpec, Vec2, STANDARD_GRAVITY};
pub use contact::{contact_force, ContactParams, ContactResponse, Surface};
pub use leg::{
    FootGeometry, ForceLaw, HardStop, LegModel, Pose, SlideStop, TendonAttachment, TendonId, TendonState, ANKLE,
    DROP_RIG_ARM_MM, HIP, KNEE, LEG_MOMENT_ARM_MM, LEG_TENDON_UNITS, SLIDE, TRAVEL_LIMIT_MM,
};
pub use sim::{
    assemble, dynamics_rhs, energy_audit, step, Actuation, ContactSample, EnergyAudit, Environment, JointDrive,
    SimState, StepInfo, Trajectory, TrajectorySample, DEFAULT_DT,
};
