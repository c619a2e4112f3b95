//! Least-squares estimate of the realized release from post-release hip samples.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::dynamics::{com_offset, ReleaseState, RobotParams, State};
use crate::error::{Error, Result};

/// One hip-position measurement with the joint angles read at the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HipSample {
    pub t: f64,
    pub hip: [f64; 2],
    pub joints: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorWindow {
    /// Release instant reported by the gripper.
    pub t_rel: f64,
    /// Joint state measured at release.
    pub x_rel: [f64; 4],
    pub samples: Vec<HipSample>,
    /// Measurement noise standard deviation (m).
    pub noise_std: f64,
}

/// Smallest relative singular value accepted in the fit.
pub const RANK_TOLERANCE: f64 = 1e-10;

impl EstimatorWindow {
    pub fn new(t_rel: f64, x_rel: State, noise_std: f64) -> Self {
        Self {
            t_rel,
            x_rel: [x_rel[0], x_rel[1], x_rel[2], x_rel[3]],
            samples: Vec::new(),
            noise_std,
        }
    }

    pub fn push(&mut self, sample: HipSample) {
        self.samples.push(sample);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 3 {
            return Err(Error::InvalidWindow(format!(
                "{} samples, at least 3 required",
                self.samples.len()
            )));
        }
        if self.samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::InvalidWindow("timestamps must strictly increase".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidWindow("noise_std must be non-negative".into()));
        }
        Ok(())
    }

    fn design(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.samples.len(), 2, |i, j| {
            if j == 0 {
                1.0
            } else {
                self.samples[i].t - self.t_rel
            }
        })
    }

    /// Predicted covariance of the fitted (position, velocity) pair per axis.
    pub fn covariance(&self) -> Result<Matrix2<f64>> {
        let a = self.design();
        let ata = a.transpose() * &a;
        let m = Matrix2::new(ata[(0, 0)], ata[(0, 1)], ata[(1, 0)], ata[(1, 1)]);
        let inv = m.try_inverse().ok_or(Error::RankDeficientFit)?;
        Ok(inv * self.noise_std.powi(2))
    }
}

/// Fits the ballistic COM model through the samples and returns the release
/// state: the measured joints plus the fitted COM position and velocity at
/// `t_rel`.
pub fn estimate_release(window: &EstimatorWindow, params: &RobotParams) -> Result<ReleaseState> {
    window.validate()?;
    let n = window.samples.len();
    let a = window.design();
    let svd = a.clone().svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > RANK_TOLERANCE * smax) {
        return Err(Error::RankDeficientFit);
    }
    let mut bx = DVector::zeros(n);
    let mut by = DVector::zeros(n);
    for (i, s) in window.samples.iter().enumerate() {
        let tau = s.t - window.t_rel;
        let com = Vector2::from(s.hip) - com_offset(params, s.joints[0], s.joints[1]);
        bx[i] = com[0];
        by[i] = com[1] - 0.5 * params.g_y * tau * tau;
    }
    let fx = svd.solve(&bx, 0.0).map_err(|_| Error::RankDeficientFit)?;
    let fy = svd.solve(&by, 0.0).map_err(|_| Error::RankDeficientFit)?;
    Ok(ReleaseState {
        t_rel: window.t_rel,
        x_rel: window.x_rel,
        p0c: [fx[0], fy[0]],
        v0c: [fx[1], fy[1]],
        g_y: params.g_y,
    })
}
