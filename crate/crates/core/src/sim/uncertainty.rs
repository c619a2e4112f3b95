//! Parameter uncertainty model and draws.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::RobotParams;
use crate::error::{Error, Result};

/// One standard deviation per uncertain parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamSpread {
    pub m1: f64,
    pub m2: f64,
    pub r1: f64,
    pub r2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub i1: f64,
    pub i2: f64,
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
}

impl Default for ParamSpread {
    fn default() -> Self {
        Self {
            m1: 0.0076,
            m2: 0.0400,
            r1: 0.0052,
            r2: 0.0033,
            kappa1: 0.0001,
            kappa2: 0.0023,
            i1: 0.0013,
            i2: 0.0009,
            sigma_alpha: 0.010,
            sigma_beta: 0.040,
        }
    }
}

impl ParamSpread {
    pub fn zero() -> Self {
        Self {
            m1: 0.0,
            m2: 0.0,
            r1: 0.0,
            r2: 0.0,
            kappa1: 0.0,
            kappa2: 0.0,
            i1: 0.0,
            i2: 0.0,
            sigma_alpha: 0.0,
            sigma_beta: 0.0,
        }
    }

    fn values(&self) -> [f64; 10] {
        [
            self.m1,
            self.m2,
            self.r1,
            self.r2,
            self.kappa1,
            self.kappa2,
            self.i1,
            self.i2,
            self.sigma_alpha,
            self.sigma_beta,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadKind {
    /// Normal with the spread as standard deviation, cut at `truncation` sigmas.
    TruncatedNormal,
    /// Uniform on `±truncation` spreads.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncertaintyModel {
    pub nominal: RobotParams,
    pub spread: ParamSpread,
    pub kind: SpreadKind,
    pub truncation: f64,
}

impl Default for UncertaintyModel {
    fn default() -> Self {
        Self {
            nominal: RobotParams::default(),
            spread: ParamSpread::default(),
            kind: SpreadKind::TruncatedNormal,
            truncation: 3.0,
        }
    }
}

impl UncertaintyModel {
    pub fn validate(&self) -> Result<()> {
        self.nominal.validate()?;
        if self.spread.values().iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::invalid("uncertainty.spread", "spreads must be non-negative"));
        }
        if !(self.truncation > 0.0) {
            return Err(Error::invalid("uncertainty.truncation", "must be positive"));
        }
        Ok(())
    }

    fn standard_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            SpreadKind::TruncatedNormal => loop {
                let z: f64 = StandardNormal.sample(rng);
                if z.abs() <= self.truncation {
                    break z;
                }
            },
            SpreadKind::Uniform => rng.random_range(-self.truncation..=self.truncation),
        }
    }
}

/// Independent draws for every uncertain parameter. The trapeze-side swing
/// terms `eta` and `zeta` move with `m1` and `i1`.
pub fn sample_params<R: Rng + ?Sized>(model: &UncertaintyModel, rng: &mut R) -> RobotParams {
    let mut p = model.nominal;
    let n = model.nominal;
    let s = model.spread;
    let mut draw = |sd: f64| {
        let z = model.standard_draw(rng);
        sd * z
    };
    p.m1 = n.m1 + draw(s.m1);
    p.m2 = n.m2 + draw(s.m2);
    p.r1 = n.r1 + draw(s.r1);
    p.r2 = n.r2 + draw(s.r2);
    p.kappa1 = n.kappa1 + draw(s.kappa1);
    p.kappa2 = n.kappa2 + draw(s.kappa2);
    p.i1 = n.i1 + draw(s.i1);
    p.i2 = n.i2 + draw(s.i2);
    p.sigma_alpha = (n.sigma_alpha + draw(s.sigma_alpha)).max(0.0);
    p.sigma_beta = (n.sigma_beta + draw(s.sigma_beta)).max(0.0);
    p.eta = n.eta + (p.m1 - n.m1);
    p.zeta = n.zeta + (p.i1 - n.i1);
    p
}
