//! Piecewise cubic state / piecewise linear control trajectory and its JSON form.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Phase, ReleaseState, State};
use crate::error::{Error, Result};

pub const TRAJECTORY_FORMAT: &str = "trapeze-trajectory/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    BudgetExhaustedFeasible,
    Infeasible,
}

impl SolveStatus {
    pub fn is_feasible(self) -> bool {
        !matches!(self, SolveStatus::Infeasible)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineMetadata {
    pub cost: f64,
    pub status: SolveStatus,
    /// Offset added to the attack angle in the approach constraint:
    /// `-2 pi nu` for a full plan, the solved auxiliary angle for a correction.
    pub approach_offset: f64,
    pub outer_iterations: usize,
    pub max_violation: f64,
    /// Correction attempt index (0 for the offline plan).
    pub attempt: u32,
}

/// Planned trajectory.
///
/// States are stored per segment as cubic coefficients in local time
/// `s = t - breakpoints[k]`; the control is linear between the entries of
/// `control_breakpoints` (segment knots and midpoints).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpline {
    pub format: String,
    pub breakpoints: Vec<f64>,
    pub phases: Vec<Phase>,
    /// `[segment][component][power]`.
    pub state_coefficients: Vec<[[f64; 4]; 4]>,
    pub final_state: [f64; 4],
    pub control_breakpoints: Vec<f64>,
    /// `[sub-interval][c0, c1]`.
    pub control_coefficients: Vec<[f64; 2]>,
    pub final_control: f64,
    pub t_rel: f64,
    pub release: ReleaseState,
    pub metadata: SplineMetadata,
}

/// Cubic Hermite coefficients of one component on a segment of length `h`.
pub fn hermite_coefficients(x0: f64, x1: f64, f0: f64, f1: f64, h: f64) -> [f64; 4] {
    let c2 = (3.0 * (x1 - x0) / h - 2.0 * f0 - f1) / h;
    let c3 = (2.0 * (x0 - x1) / h + f0 + f1) / (h * h);
    [x0, f0, c2, c3]
}

fn locate(breaks: &[f64], t: f64) -> usize {
    // last index k with breaks[k] <= t, clamped to a valid segment
    let n = breaks.len() - 1;
    match breaks.binary_search_by(|b| b.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(k) => k.min(n - 1),
        Err(0) => 0,
        Err(k) => (k - 1).min(n - 1),
    }
}

impl TrajectorySpline {
    /// Builds the spline from knot data. `derivs[k]` holds the state
    /// derivative at the start (`.0`) and end (`.1`) of segment `k`, and
    /// `controls[k]` its start, midpoint and end controls. Where neighbouring
    /// segments disagree on a shared knot control the control is
    /// right-continuous.
    #[allow(clippy::too_many_arguments)]
    pub fn from_knots(
        breakpoints: Vec<f64>,
        phases: Vec<Phase>,
        states: &[State],
        derivs: &[(State, State)],
        controls: &[[f64; 3]],
        release: ReleaseState,
        metadata: SplineMetadata,
    ) -> Result<Self> {
        let n = breakpoints.len().saturating_sub(1);
        if n == 0 || phases.len() != n || states.len() != n + 1 || derivs.len() != n || controls.len() != n {
            return Err(Error::MalformedTrajectory("inconsistent knot data".into()));
        }
        let mut state_coefficients = Vec::with_capacity(n);
        let mut control_breakpoints = Vec::with_capacity(2 * n + 1);
        let mut control_coefficients = Vec::with_capacity(2 * n);
        for k in 0..n {
            let h = breakpoints[k + 1] - breakpoints[k];
            if !(h > 0.0) {
                return Err(Error::MalformedTrajectory(format!("segment {k} has length {h}")));
            }
            let (f0, f1) = &derivs[k];
            let mut seg = [[0.0; 4]; 4];
            for (c, row) in seg.iter_mut().enumerate() {
                *row = hermite_coefficients(states[k][c], states[k + 1][c], f0[c], f1[c], h);
            }
            state_coefficients.push(seg);

            let tm = breakpoints[k] + 0.5 * h;
            control_breakpoints.push(breakpoints[k]);
            control_breakpoints.push(tm);
            let [u0, um, u1] = controls[k];
            control_coefficients.push([u0, (um - u0) / (0.5 * h)]);
            control_coefficients.push([um, (u1 - um) / (0.5 * h)]);
        }
        control_breakpoints.push(breakpoints[n]);
        let last = states[n];
        Ok(Self {
            format: TRAJECTORY_FORMAT.to_string(),
            breakpoints,
            phases,
            state_coefficients,
            final_state: [last[0], last[1], last[2], last[3]],
            control_breakpoints,
            control_coefficients,
            final_control: controls[n - 1][2],
            t_rel: release.t_rel,
            release,
            metadata,
        })
    }

    pub fn start_time(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.breakpoints.last().expect("non-empty breakpoints")
    }

    pub fn segments(&self) -> usize {
        self.state_coefficients.len()
    }

    /// Phase in effect at `t`; the release instant belongs to the swing.
    pub fn phase_at(&self, t: f64) -> Phase {
        if t <= self.t_rel && self.phases.first() == Some(&Phase::Swing) {
            Phase::Swing
        } else {
            Phase::Flight
        }
    }

    /// State at `t`, clamped to the covered interval.
    pub fn state(&self, t: f64) -> State {
        let t = t.clamp(self.start_time(), self.end_time());
        if t == self.end_time() {
            return State::from(self.final_state);
        }
        let k = locate(&self.breakpoints, t);
        let s = t - self.breakpoints[k];
        let seg = &self.state_coefficients[k];
        State::from_fn(|c, _| {
            let a = &seg[c];
            a[0] + s * (a[1] + s * (a[2] + s * a[3]))
        })
    }

    /// Time derivative of the state polynomial at `t`.
    pub fn state_rate(&self, t: f64) -> State {
        let t = t.clamp(self.start_time(), self.end_time());
        let k = locate(&self.breakpoints, t);
        let s = t - self.breakpoints[k];
        let seg = &self.state_coefficients[k];
        State::from_fn(|c, _| {
            let a = &seg[c];
            a[1] + s * (2.0 * a[2] + s * 3.0 * a[3])
        })
    }

    pub fn control(&self, t: f64) -> f64 {
        let t = t.clamp(self.start_time(), self.end_time());
        if t == self.end_time() {
            return self.final_control;
        }
        let k = locate(&self.control_breakpoints, t);
        let [c0, c1] = self.control_coefficients[k];
        c0 + c1 * (t - self.control_breakpoints[k])
    }

    pub fn covers(&self, t: f64) -> Result<()> {
        if t < self.start_time() || t > self.end_time() {
            return Err(Error::OutOfRange {
                t,
                start: self.start_time(),
                end: self.end_time(),
            });
        }
        Ok(())
    }

    pub fn flight_start_index(&self) -> usize {
        self.phases
            .iter()
            .position(|p| *p == Phase::Flight)
            .unwrap_or(self.phases.len())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spline: Self = serde_json::from_str(s).map_err(|e| Error::MalformedTrajectory(e.to_string()))?;
        spline.check()?;
        Ok(spline)
    }

    fn check(&self) -> Result<()> {
        if self.format != TRAJECTORY_FORMAT {
            return Err(Error::MalformedTrajectory(format!("unknown format `{}`", self.format)));
        }
        let n = self.state_coefficients.len();
        if n == 0
            || self.breakpoints.len() != n + 1
            || self.phases.len() != n
            || self.control_breakpoints.len() != 2 * n + 1
            || self.control_coefficients.len() != 2 * n
        {
            return Err(Error::MalformedTrajectory("array lengths disagree".into()));
        }
        if self.breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::MalformedTrajectory("breakpoints must increase".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{release_map, RobotParams};
    use proptest::prelude::*;

    type Sample = (Vec<f64>, Vec<State>, Vec<(State, State)>, Vec<f64>, Vec<f64>);

    fn sample(n: usize, h: f64) -> Sample {
        let breaks: Vec<f64> = (0..=n).map(|k| 0.3 + k as f64 * h).collect();
        let states: Vec<State> = breaks
            .iter()
            .map(|&t| State::new(t.sin(), t * t, t.cos(), -t))
            .collect();
        let derivs = breaks
            .windows(2)
            .map(|w| {
                let d = |t: f64| State::new(t.cos(), 2.0 * t, -t.sin(), -1.0);
                (d(w[0]), d(w[1]))
            })
            .collect();
        let u: Vec<f64> = breaks.iter().map(|t| 3.0 * t - 1.0).collect();
        let um: Vec<f64> = breaks.windows(2).map(|w| (w[0] + w[1]).sin()).collect();
        (breaks, states, derivs, u, um)
    }

    fn build(n: usize, h: f64) -> (TrajectorySpline, Vec<State>, Vec<f64>, Vec<f64>) {
        let (b, x, d, u, um) = sample(n, h);
        let release = release_map(&RobotParams::default(), &x[n / 2], b[n / 2]);
        let meta = SplineMetadata {
            cost: 1.0,
            status: SolveStatus::Converged,
            approach_offset: 0.0,
            outer_iterations: 1,
            max_violation: 0.0,
            attempt: 0,
        };
        let phases = (0..n)
            .map(|k| if k < n / 2 { Phase::Swing } else { Phase::Flight })
            .collect();
        let controls: Vec<[f64; 3]> = (0..n).map(|k| [u[k], um[k], u[k + 1]]).collect();
        let s = TrajectorySpline::from_knots(b, phases, &x, &d, &controls, release, meta).unwrap();
        (s, x, u, um)
    }

    proptest! {
        #[test]
        fn knots_reproduce_values_exactly(n in 2usize..30, h in 0.01f64..0.3) {
            let (s, x, u, um) = build(n, h);
            for k in 0..=n {
                prop_assert_eq!(s.state(s.breakpoints[k]), x[k]);
                prop_assert_eq!(s.control(s.breakpoints[k]), u[k]);
            }
            for (k, &m) in um.iter().enumerate() {
                prop_assert_eq!(s.control(s.control_breakpoints[2 * k + 1]), m);
            }
        }

        #[test]
        fn state_is_continuous_at_breakpoints(n in 2usize..30, h in 0.01f64..0.3) {
            let (s, _, _, _) = build(n, h);
            for k in 1..n {
                let t = s.breakpoints[k];
                let left = &s.state_coefficients[k - 1];
                let hk = t - s.breakpoints[k - 1];
                for (c, a) in left.iter().enumerate() {
                    let end = a[0] + hk * (a[1] + hk * (a[2] + hk * a[3]));
                    prop_assert!((end - s.state(t)[c]).abs() <= 1e-9 * (1.0 + end.abs()));
                }
            }
        }
    }

    #[test]
    fn json_round_trip_and_rejects_garbage() {
        let (s, _, _, _) = build(6, 0.1);
        let back = TrajectorySpline::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let mut bad = s.clone();
        bad.breakpoints.pop();
        assert!(TrajectorySpline::from_json(&bad.to_json()).is_err());
        assert!(TrajectorySpline::from_json("{}").is_err());
    }

    #[test]
    fn phase_boundary_belongs_to_swing() {
        let (s, _, _, _) = build(6, 0.1);
        assert_eq!(s.phase_at(s.t_rel), Phase::Swing);
        assert_eq!(s.phase_at(s.t_rel + 1e-9), Phase::Flight);
        assert_eq!(s.flight_start_index(), 3);
    }
}
