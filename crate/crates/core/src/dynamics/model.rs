//! Manipulator-form equations of motion shared by both phases.
//!
//! Both phases have the structure `M(q) q'' + C(q, q') q' + B q' + g(q) = [0, 1]^T u`
//! and differ only in the parameter vector `theta`.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::params::RobotParams;
use crate::error::{Error, Result};

/// Full state `[alpha, beta, alpha_dot, beta_dot]`.
pub type State = Vector4<f64>;

/// Condition number above which the mass matrix is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Robot attached to the trapeze.
    Swing,
    /// Robot airborne.
    Flight,
}

impl Phase {
    pub fn index(self) -> u8 {
        match self {
            Phase::Swing => 0,
            Phase::Flight => 1,
        }
    }
}

/// The eight-entry parameter vector of one phase plus the pivot offset that
/// enters the gravity term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    pub phase: Phase,
    pub theta: [f64; 8],
    pub kappa1: f64,
    /// Reduced mass of the free links; only meaningful in flight.
    pub mu: f64,
}

/// Builds the parameter vector for `phase`.
pub fn build_theta(p: &RobotParams, phase: Phase) -> PhaseParams {
    let mu = p.reduced_mass();
    let theta = match phase {
        Phase::Swing => [
            p.m2 * p.l_h * p.r2,
            p.eta * (p.l_c * p.l_c + p.a_c * p.a_c) + (p.eta + p.m2) * p.l_h * p.l_h - 2.0 * p.eta * p.l_h * p.l_c
                + p.zeta,
            p.m2 * p.r2 * p.r2 + p.i2,
            p.eta * p.g_y * p.a_c,
            p.eta * p.g_y * (p.l_h - p.l_c) + p.m2 * p.g_y * p.l_h,
            p.m2 * p.g_y * p.r2,
            p.sigma_alpha,
            p.sigma_beta,
        ],
        Phase::Flight => [
            mu * p.r1 * p.r2,
            mu * p.r1 * p.r1 + p.i1,
            mu * p.r2 * p.r2 + p.i2,
            0.0,
            0.0,
            0.0,
            0.0,
            p.sigma_beta,
        ],
    };
    PhaseParams {
        phase,
        theta,
        kappa1: p.kappa1,
        mu,
    }
}

impl PhaseParams {
    pub fn new(p: &RobotParams, phase: Phase) -> Self {
        build_theta(p, phase)
    }

    pub fn mass_matrix(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let t = &self.theta;
        let c = q[1].cos();
        let off = t[0] * c + t[2];
        Matrix2::new(2.0 * t[0] * c + t[1] + t[2], off, off, t[2])
    }

    pub fn coriolis_matrix(&self, q: &Vector2<f64>, qd: &Vector2<f64>) -> Matrix2<f64> {
        let h = self.theta[0] * q[1].sin();
        Matrix2::new(-h * qd[1], -h * (qd[0] + qd[1]), h * qd[0], 0.0)
    }

    pub fn gravity_vector(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let t = &self.theta;
        let a = q[0] + self.kappa1;
        let link2 = t[3] * (a + q[1]).cos();
        Vector2::new(t[5] * a.sin() + t[4] * a.cos() + link2, link2)
    }

    pub fn damping_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.theta[6], 0.0, 0.0, self.theta[7])
    }

    fn inverse_mass(&self, q: &Vector2<f64>) -> Result<Matrix2<f64>> {
        let m = self.mass_matrix(q);
        // closed-form eigenvalues of a symmetric 2x2
        let half_tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
        let disc = (0.25 * (m[(0, 0)] - m[(1, 1)]).powi(2) + m[(0, 1)] * m[(1, 0)]).sqrt();
        let (hi, lo) = (half_tr + disc, half_tr - disc);
        let cond = if lo.abs() > 0.0 {
            hi.abs() / lo.abs()
        } else {
            f64::INFINITY
        };
        if !(cond <= SINGULAR_CONDITION) {
            return Err(Error::SingularMassMatrix(cond));
        }
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        Ok(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
    }

    /// `C(q, q') q'` without forming the matrix.
    fn coriolis_force(&self, q: &Vector2<f64>, qd: &Vector2<f64>) -> Vector2<f64> {
        let h = self.theta[0] * q[1].sin();
        Vector2::new(-h * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]), h * qd[0] * qd[0])
    }

    fn accel(&self, x: &State, u: f64) -> Result<(Vector2<f64>, Matrix2<f64>)> {
        let q = x.fixed_rows::<2>(0).into_owned();
        let qd = x.fixed_rows::<2>(2).into_owned();
        let minv = self.inverse_mass(&q)?;
        let rhs =
            Vector2::new(0.0, u) - self.coriolis_force(&q, &qd) - self.damping_matrix() * qd - self.gravity_vector(&q);
        Ok((minv * rhs, minv))
    }

    /// State derivative `f_s(x, u)`.
    pub fn forward_dynamics(&self, x: &State, u: f64) -> Result<State> {
        let (qdd, _) = self.accel(x, u)?;
        Ok(Vector4::new(x[2], x[3], qdd[0], qdd[1]))
    }

    /// Analytic Jacobians `(df/dx, df/du)`.
    pub fn linearize(&self, x: &State, u: f64) -> Result<(Matrix4<f64>, Vector4<f64>)> {
        let t = &self.theta;
        let (qdd, minv) = self.accel(x, u)?;
        let (al, be, ad, bd) = (x[0], x[1], x[2], x[3]);
        let (sb, cb) = be.sin_cos();
        let a = al + self.kappa1;
        let sab = (a + be).sin();

        // d(rhs)/dq where rhs = [0,1]u - Cq' - Bq' - g
        let dg_da = Vector2::new(t[5] * a.cos() - t[4] * a.sin() - t[3] * sab, -t[3] * sab);
        let dg_db = Vector2::new(-t[3] * sab, -t[3] * sab);
        let dc_db = Vector2::new(-t[0] * cb * (2.0 * ad * bd + bd * bd), t[0] * cb * ad * ad);
        let drhs_da = -dg_da;
        let drhs_db = -dc_db - dg_db;
        // M depends on beta only: d(M^-1 w)/dbeta = M^-1 (dw/dbeta - dM/dbeta * qdd)
        let dm_db = Matrix2::new(-2.0 * t[0] * sb, -t[0] * sb, -t[0] * sb, 0.0);
        let dqdd_da = minv * drhs_da;
        let dqdd_db = minv * (drhs_db - dm_db * qdd);

        let dc_dad = Vector2::new(-2.0 * t[0] * sb * bd, 2.0 * t[0] * sb * ad);
        let dc_dbd = Vector2::new(-2.0 * t[0] * sb * (ad + bd), 0.0);
        let dqdd_dad = minv * (-dc_dad - Vector2::new(t[6], 0.0));
        let dqdd_dbd = minv * (-dc_dbd - Vector2::new(0.0, t[7]));

        let mut jac = Matrix4::zeros();
        jac[(0, 2)] = 1.0;
        jac[(1, 3)] = 1.0;
        for r in 0..2 {
            jac[(2 + r, 0)] = dqdd_da[r];
            jac[(2 + r, 1)] = dqdd_db[r];
            jac[(2 + r, 2)] = dqdd_dad[r];
            jac[(2 + r, 3)] = dqdd_dbd[r];
        }
        let col = minv.column(1);
        let b = Vector4::new(0.0, 0.0, col[0], col[1]);
        Ok((jac, b))
    }

    /// Central-difference Jacobians with step `h`.
    pub fn linearize_fd(&self, x: &State, u: f64, h: f64) -> Result<(Matrix4<f64>, Vector4<f64>)> {
        let mut jac = Matrix4::zeros();
        for j in 0..4 {
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += h;
            xm[j] -= h;
            let col = (self.forward_dynamics(&xp, u)? - self.forward_dynamics(&xm, u)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let b = (self.forward_dynamics(x, u + h)? - self.forward_dynamics(x, u - h)?) / (2.0 * h);
        Ok((jac, b))
    }

    /// First row of `M(q) q'`: the generalized momentum conjugate to alpha.
    pub fn momentum_alpha(&self, x: &State) -> f64 {
        let m = self.mass_matrix(&Vector2::new(x[0], x[1]));
        m[(0, 0)] * x[2] + m[(0, 1)] * x[3]
    }

    /// Potential whose gradient is the gravity vector.
    pub fn potential(&self, q: &Vector2<f64>) -> f64 {
        let t = &self.theta;
        let a = q[0] + self.kappa1;
        -t[5] * a.cos() + t[4] * a.sin() + t[3] * (a + q[1]).sin()
    }

    /// Kinetic plus potential energy.
    pub fn energy(&self, x: &State) -> f64 {
        let q = Vector2::new(x[0], x[1]);
        let qd = Vector2::new(x[2], x[3]);
        0.5 * qd.dot(&(self.mass_matrix(&q) * qd)) + self.potential(&q)
    }
}

/// Classic fourth-order Runge-Kutta step of the phase dynamics under a
/// control that may vary inside the step.
pub fn rk4_step<F>(model: &PhaseParams, x: &State, t: f64, dt: f64, control: F) -> Result<State>
where
    F: Fn(f64) -> f64,
{
    let k1 = model.forward_dynamics(x, control(t))?;
    let k2 = model.forward_dynamics(&(x + k1 * (0.5 * dt)), control(t + 0.5 * dt))?;
    let k3 = model.forward_dynamics(&(x + k2 * (0.5 * dt)), control(t + 0.5 * dt))?;
    let k4 = model.forward_dynamics(&(x + k3 * dt), control(t + dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}
