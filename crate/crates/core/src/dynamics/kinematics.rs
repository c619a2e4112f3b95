//! Hip, COM and gripper geometry, and the swing-to-flight release map.

use nalgebra::{Rotation2, Vector2};
use serde::{Deserialize, Serialize};

use super::model::State;
use super::params::{RobotParams, TargetSpec};
use crate::error::{Error, Result};

/// Gripper-to-target distance below which the attack angle is undefined.
pub const ATTACK_ANGLE_MIN_DISTANCE: f64 = 1e-9;

/// Mass-weighted offset `p_c^h(q)` between hip and COM.
pub fn com_offset(p: &RobotParams, alpha: f64, beta: f64) -> Vector2<f64> {
    let m = p.total_mass();
    let (w1, w2) = (p.m1 * p.r1 / m, p.m2 * p.r2 / m);
    let ab = alpha + beta;
    Vector2::new(w1 * alpha.cos() + w2 * ab.cos(), w1 * alpha.sin() + w2 * ab.sin())
}

/// Time derivative of [`com_offset`].
pub fn com_offset_rate(p: &RobotParams, x: &State) -> Vector2<f64> {
    let m = p.total_mass();
    let (w1, w2) = (p.m1 * p.r1 / m, p.m2 * p.r2 / m);
    let (alpha, beta, ad, bd) = (x[0], x[1], x[2], x[3]);
    let ab = alpha + beta;
    let abd = ad + bd;
    Vector2::new(
        -w1 * alpha.sin() * ad - w2 * ab.sin() * abd,
        w1 * alpha.cos() * ad + w2 * ab.cos() * abd,
    )
}

/// Hip position while hanging from the trapeze.
pub fn hip_position_swing(p: &RobotParams, alpha: f64) -> Vector2<f64> {
    let a = alpha + p.kappa1;
    -p.l_h * Vector2::new(a.cos(), a.sin())
}

pub fn hip_velocity_swing(p: &RobotParams, alpha: f64, alpha_dot: f64) -> Vector2<f64> {
    let a = alpha + p.kappa1;
    p.l_h * alpha_dot * Vector2::new(a.sin(), -a.cos())
}

/// Full releasing condition: the joint state plus the COM initial
/// conditions of the ballistic flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReleaseState {
    pub t_rel: f64,
    pub x_rel: [f64; 4],
    pub p0c: [f64; 2],
    pub v0c: [f64; 2],
    /// Gravity used for the ballistic extrapolation (m/s^2).
    pub g_y: f64,
}

impl ReleaseState {
    pub fn state(&self) -> State {
        State::from(self.x_rel)
    }

    pub fn p0c(&self) -> Vector2<f64> {
        Vector2::from(self.p0c)
    }

    pub fn v0c(&self) -> Vector2<f64> {
        Vector2::from(self.v0c)
    }

    /// Ballistic COM position at absolute time `t` (elapsed time is `t - t_rel`).
    pub fn com_at(&self, t: f64) -> Vector2<f64> {
        let dt = t - self.t_rel;
        self.p0c() + self.v0c() * dt + Vector2::new(0.0, 0.5 * self.g_y * dt * dt)
    }

    pub fn com_velocity_at(&self, t: f64) -> Vector2<f64> {
        self.v0c() + Vector2::new(0.0, self.g_y * (t - self.t_rel))
    }
}

/// Maps the final swing state to the release condition.
pub fn release_map(p: &RobotParams, x_rel: &State, t_rel: f64) -> ReleaseState {
    let p0c = hip_position_swing(p, x_rel[0]) - com_offset(p, x_rel[0], x_rel[1]);
    let v0c = hip_velocity_swing(p, x_rel[0], x_rel[2]) - com_offset_rate(p, x_rel);
    ReleaseState {
        t_rel,
        x_rel: [x_rel[0], x_rel[1], x_rel[2], x_rel[3]],
        p0c: [p0c[0], p0c[1]],
        v0c: [v0c[0], v0c[1]],
        g_y: p.g_y,
    }
}

pub fn com_ballistic(release: &ReleaseState, t: f64) -> Vector2<f64> {
    release.com_at(t)
}

/// Gripper offset from the hip in the world frame.
pub fn gripper_offset(p: &RobotParams, alpha: f64) -> Vector2<f64> {
    Rotation2::new(alpha + p.r_0_g) * Vector2::from(p.p_h_g)
}

/// Hip position in flight.
pub fn hip_world(p: &RobotParams, release: &ReleaseState, alpha: f64, beta: f64, t: f64) -> Vector2<f64> {
    release.com_at(t) + com_offset(p, alpha, beta)
}

/// Landing point `p_0^g` in flight.
pub fn gripper_world(p: &RobotParams, release: &ReleaseState, alpha: f64, beta: f64, t: f64) -> Vector2<f64> {
    hip_world(p, release, alpha, beta, t) + gripper_offset(p, alpha)
}

/// Attack angle of the target as seen from the gripper frame.
pub fn attack_angle(p: &RobotParams, release: &ReleaseState, x: &State, t: f64, target: &TargetSpec) -> Result<f64> {
    let d = Vector2::from(target.p0t) - gripper_world(p, release, x[0], x[1], t);
    attack_angle_from(p, x[0], &d)
}

/// Attack angle given the gripper-to-target vector.
pub fn attack_angle_from(p: &RobotParams, alpha: f64, to_target: &Vector2<f64>) -> Result<f64> {
    let n = to_target.norm();
    if n < ATTACK_ANGLE_MIN_DISTANCE {
        return Err(Error::UndefinedAttackAngle(n));
    }
    Ok(alpha + p.r_0_g - to_target[1].atan2(to_target[0]))
}
