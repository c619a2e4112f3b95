use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the robot and the trapeze apparatus.
///
/// The defaults are the nominal robot values plus placeholder apparatus
/// geometry (`l_h`, `eta`, `zeta`, `a_c`, `l_c`, `p_h_g`) that has not been
/// measured on hardware.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotParams {
    /// Link masses (kg).
    pub m1: f64,
    pub m2: f64,
    /// Link inertias about their local z axis (kg m^2).
    pub i1: f64,
    pub i2: f64,
    /// COM offsets of the links from the hip (m).
    pub r1: f64,
    pub r2: f64,
    /// Angular offsets (rad). `kappa2` is carried for completeness and does
    /// not enter the equations of motion.
    pub kappa1: f64,
    pub kappa2: f64,
    /// Joint damping at the trapeze pivot and the hip (N m s/rad).
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
    /// Trapeze pivot to hip length (m).
    pub l_h: f64,
    /// Mass of link 1 together with the trapeze (kg).
    pub eta: f64,
    /// Inertia of link 1 with both links rigidly coupled (kg m^2).
    pub zeta: f64,
    /// COM offsets of the coupled swing body (m).
    pub a_c: f64,
    pub l_c: f64,
    /// Gravity along +y of the world frame (m/s^2, negative).
    pub g_y: f64,
    /// Gripper contact point relative to the hip, in the first-link frame (m).
    pub p_h_g: [f64; 2],
    /// Angular offset of the gripper frame x axis from link 1 (rad).
    pub r_0_g: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        let m1 = 1.5790;
        let i1 = 0.0375;
        let l_h = 1.0;
        Self {
            m1,
            m2: 1.4370,
            i1,
            i2: 0.0237,
            r1: 0.1443,
            r2: 0.1269,
            kappa1: -0.0369,
            kappa2: 0.0001,
            sigma_alpha: 0.050,
            sigma_beta: 0.200,
            l_h,
            eta: m1 + 0.2,
            zeta: i1 + 0.05,
            a_c: 0.05,
            l_c: 0.5 * l_h,
            g_y: -9.81,
            p_h_g: [0.25, 0.0],
            r_0_g: 0.0,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("eta", self.eta),
            ("i1", self.i1),
            ("i2", self.i2),
            ("zeta", self.zeta),
            ("l_h", self.l_h),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::invalid(field, format!("must be positive, got {value}")));
            }
        }
        if !(self.g_y < 0.0) {
            return Err(Error::invalid("g_y", format!("must be negative, got {}", self.g_y)));
        }
        if self.sigma_alpha < 0.0 || self.sigma_beta < 0.0 {
            return Err(Error::invalid("sigma", "damping must be non-negative"));
        }
        let finite = [
            self.r1,
            self.r2,
            self.kappa1,
            self.kappa2,
            self.a_c,
            self.l_c,
            self.p_h_g[0],
            self.p_h_g[1],
            self.r_0_g,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("geometry", "all offsets must be finite"));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2
    }

    /// Reduced mass of the two free-flying links.
    pub fn reduced_mass(&self) -> f64 {
        self.m1 * self.m2 / (self.m1 + self.m2)
    }
}

/// Landing target and approach requirements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetSpec {
    /// Target bar position in the world frame (m).
    pub p0t: [f64; 2],
    /// Opening of the gripper (rad).
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Fractions of the flight over which the approach angle is enforced.
    pub phi_min: f64,
    pub phi_max: f64,
    /// Somersault count.
    pub nu: u32,
    /// Also hold the approach angle in the opening along the arrival
    /// direction, the limit of the attack angle as the gripper reaches the
    /// target.
    pub arrival_in_band: bool,
    /// Amount by which the arrival constraint narrows the opening on both
    /// sides (rad).
    pub arrival_margin: f64,
}

impl Default for TargetSpec {
    fn default() -> Self {
        Self {
            p0t: [1.9, -1.725],
            gamma_min: (-40.0f64).to_radians(),
            gamma_max: 10.0f64.to_radians(),
            phi_min: 0.73,
            phi_max: 0.90,
            nu: 1,
            arrival_in_band: true,
            arrival_margin: 0.3,
        }
    }
}

impl TargetSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_min < self.gamma_max) {
            return Err(Error::invalid("gamma_min", "must be below gamma_max"));
        }
        if !(0.0 <= self.phi_min && self.phi_min <= self.phi_max && self.phi_max <= 1.0) {
            return Err(Error::invalid(
                "phi_min",
                "approach window must satisfy 0 <= phi_min <= phi_max <= 1",
            ));
        }
        if !(self.arrival_margin >= 0.0 && 2.0 * self.arrival_margin < self.gamma_max - self.gamma_min) {
            return Err(Error::invalid(
                "arrival_margin",
                "must be non-negative and leave part of the opening",
            ));
        }
        if !(self.p0t[0].is_finite() && self.p0t[1].is_finite()) {
            return Err(Error::invalid("p0t", "target must be finite"));
        }
        Ok(())
    }

    /// The fixed angular offset applied to the attack angle in the offline problem.
    pub fn somersault_offset(&self) -> f64 {
        -2.0 * std::f64::consts::PI * self.nu as f64
    }

    pub fn in_band(&self, angle: f64) -> bool {
        angle >= self.gamma_min && angle <= self.gamma_max
    }
}
