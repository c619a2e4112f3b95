//! Hybrid two-link dynamics: swinging from the trapeze and free flight.

mod kinematics;
mod model;
mod params;

pub use kinematics::{
    attack_angle, attack_angle_from, com_ballistic, com_offset, com_offset_rate, gripper_offset, gripper_world,
    hip_position_swing, hip_velocity_swing, hip_world, release_map, ReleaseState, ATTACK_ANGLE_MIN_DISTANCE,
};
pub use model::{build_theta, rk4_step, Phase, PhaseParams, State, SINGULAR_CONDITION};
pub use params::{RobotParams, TargetSpec};
