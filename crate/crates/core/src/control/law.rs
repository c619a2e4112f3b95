//! Time-varying LQR feedback around a planned reference.

use crate::dynamics::State;
use crate::planner::TrajectorySpline;

use super::GainSchedule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub u: f64,
    pub saturated: bool,
}

/// `u = u*(t) - K(t) (x - x*(t))`, clipped to `[-u_max, u_max]`.
pub fn tvlqr_control(
    schedule: &GainSchedule,
    spline: &TrajectorySpline,
    x: &State,
    t: f64,
    u_max: f64,
) -> ControlOutput {
    let dx = x - spline.state(t);
    let u = spline.control(t) - (schedule.gain(t) * dx)[0];
    saturate(u, u_max)
}

/// Feedforward only.
pub fn open_loop_control(spline: &TrajectorySpline, t: f64, u_max: f64) -> ControlOutput {
    saturate(spline.control(t), u_max)
}

fn saturate(u: f64, u_max: f64) -> ControlOutput {
    let clipped = u.clamp(-u_max, u_max);
    ControlOutput {
        u: clipped,
        saturated: clipped != u,
    }
}
