//! Augmented-Lagrangian solver for box-bounded nonlinear programs.
//!
//! The outer loop updates multipliers and the penalty; the inner loop
//! minimizes the augmented Lagrangian with a projected, damped Gauss-Newton
//! step: the curvature model is the exact cost curvature plus
//! `rho * J^T J` over equalities and active inequalities.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::spline::SolveStatus;
use crate::error::Result;

/// Sparse Jacobian row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn push(&mut self, col: usize, val: f64) {
        if val != 0.0 {
            self.entries.push((col, val));
        }
    }

    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut row = vec![0.0; n];
        for &(c, v) in &self.entries {
            row[c] += v;
        }
        row
    }
}

/// Equalities `c(z) = 0`, inequalities `g(z) <= 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintValues {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
}

impl ConstraintValues {
    pub fn max_violation(&self) -> f64 {
        let e = self.eq.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.ineq.iter().fold(e, |m, v| m.max(*v))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintJacobian {
    pub eq: Vec<SparseRow>,
    pub ineq: Vec<SparseRow>,
}

pub trait NlpProblem {
    fn dim(&self) -> usize;
    fn lower_bounds(&self) -> &[f64];
    fn upper_bounds(&self) -> &[f64];
    fn cost(&self, z: &[f64]) -> f64;
    fn cost_gradient(&self, z: &[f64]) -> Vec<f64>;
    /// Diagonal curvature of the cost used by the inner model.
    fn cost_curvature(&self, z: &[f64]) -> Vec<f64>;
    fn constraints(&self, z: &[f64]) -> Result<ConstraintValues>;
    fn jacobian(&self, z: &[f64]) -> Result<ConstraintJacobian>;
}

/// Shared flag for cooperative cancellation of a running solve.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NlpOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    pub constraint_tol: f64,
    /// Relative cost change between outer iterations accepted as converged.
    pub cost_tol: f64,
    /// Stationarity tolerance on the projected gradient.
    pub optimality_tol: f64,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
    /// Wall-clock budget in seconds; `None` leaves only the iteration caps.
    pub wall_clock_budget: Option<f64>,
    /// Cap on inner iterations summed over the whole solve. Unlike the
    /// wall-clock budget this stops at the same point on every machine.
    pub work_budget: Option<usize>,
}

impl Default for NlpOptions {
    fn default() -> Self {
        Self {
            max_outer: 60,
            max_inner: 80,
            constraint_tol: 1e-6,
            cost_tol: 1e-9,
            optimality_tol: 1e-6,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            max_penalty: 1e10,
            wall_clock_budget: None,
            work_budget: None,
        }
    }
}

/// Starting point, optionally with multipliers from a previous solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmStart {
    pub z: Vec<f64>,
    pub eq_multipliers: Option<Vec<f64>>,
    pub ineq_multipliers: Option<Vec<f64>>,
    pub penalty: Option<f64>,
}

impl WarmStart {
    pub fn cold(z: Vec<f64>) -> Self {
        Self { z, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlpSolution {
    pub z: Vec<f64>,
    pub cost: f64,
    pub status: SolveStatus,
    pub max_violation: f64,
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
    pub penalty: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Stopped by cancellation or a budget rather than an iteration cap.
    pub interrupted: bool,
    pub elapsed: f64,
}

struct Merit {
    value: f64,
    cons: ConstraintValues,
}

struct State<'a> {
    lambda: &'a [f64],
    mu: &'a [f64],
    rho: f64,
}

impl State<'_> {
    fn merit<P: NlpProblem + ?Sized>(&self, p: &P, z: &[f64]) -> Result<Merit> {
        let cost = p.cost(z);
        let cons = p.constraints(z)?;
        let mut value = cost;
        for (c, l) in cons.eq.iter().zip(self.lambda) {
            value += l * c + 0.5 * self.rho * c * c;
        }
        for (g, m) in cons.ineq.iter().zip(self.mu) {
            let s = (m + self.rho * g).max(0.0);
            value += (s * s - m * m) / (2.0 * self.rho);
        }
        if !value.is_finite() {
            value = f64::INFINITY;
        }
        Ok(Merit { value, cons })
    }
}

fn project(z: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in z.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

pub struct AugmentedLagrangian {
    pub options: NlpOptions,
}

impl AugmentedLagrangian {
    pub fn new(options: NlpOptions) -> Self {
        Self { options }
    }

    pub fn solve<P: NlpProblem + ?Sized>(
        &self,
        problem: &P,
        start: WarmStart,
        cancel: Option<&CancelToken>,
    ) -> Result<NlpSolution> {
        let opts = &self.options;
        let started = Instant::now();
        let n = problem.dim();
        let (lo, hi) = (problem.lower_bounds(), problem.upper_bounds());
        let mut z = start.z;
        assert_eq!(z.len(), n, "warm start dimension checked by caller");
        project(&mut z, lo, hi);

        let first = problem.constraints(&z)?;
        let mut lambda = start
            .eq_multipliers
            .filter(|l| l.len() == first.eq.len())
            .unwrap_or_else(|| vec![0.0; first.eq.len()]);
        let mut mu = start
            .ineq_multipliers
            .filter(|m| m.len() == first.ineq.len())
            .unwrap_or_else(|| vec![0.0; first.ineq.len()]);
        let mut rho = start.penalty.unwrap_or(opts.initial_penalty);

        let out_of_time = |work: usize| {
            cancel.is_some_and(|c| c.is_cancelled())
                || opts.work_budget.is_some_and(|w| work >= w)
                || opts
                    .wall_clock_budget
                    .is_some_and(|b| started.elapsed().as_secs_f64() > b)
        };

        let mut best: Option<(Vec<f64>, f64, f64)> = None;
        let mut prev_violation = first.max_violation();
        let mut prev_cost = problem.cost(&z);
        let mut omega = 1e-2f64.max(opts.optimality_tol);
        let mut inner_total = 0;
        let mut status = SolveStatus::Infeasible;
        let mut outer = 0;
        let mut violation = prev_violation;
        let mut cost = prev_cost;
        let mut interrupted = false;

        while outer < opts.max_outer {
            outer += 1;
            let st = State {
                lambda: &lambda,
                mu: &mu,
                rho,
            };
            let (inner_iters, stationarity, stopped) =
                self.minimize_inner(problem, &st, &mut z, omega, inner_total, &out_of_time)?;
            inner_total += inner_iters;
            let cons = problem.constraints(&z)?;
            violation = cons.max_violation();
            cost = problem.cost(&z);

            if violation <= opts.constraint_tol && best.as_ref().is_none_or(|(_, c, _)| cost < *c) {
                best = Some((z.clone(), cost, violation));
            }

            let cost_change = (cost - prev_cost).abs() / prev_cost.abs().max(1.0);
            log::debug!(
                "outer {outer}: cost {cost:.6e} viol {violation:.3e} stat {stationarity:.3e} rho {rho:.1e} inner {inner_iters}"
            );
            if violation <= opts.constraint_tol && (stationarity <= opts.optimality_tol || cost_change <= opts.cost_tol)
            {
                status = SolveStatus::Converged;
                break;
            }
            if stopped {
                interrupted = true;
                break;
            }

            for (l, c) in lambda.iter_mut().zip(&cons.eq) {
                *l += rho * c;
            }
            for (m, g) in mu.iter_mut().zip(&cons.ineq) {
                *m = (*m + rho * g).max(0.0);
            }
            if violation > 0.25 * prev_violation && violation > opts.constraint_tol {
                rho = (rho * opts.penalty_growth).min(opts.max_penalty);
            }
            omega = (omega * 0.1).max(opts.optimality_tol);
            prev_violation = violation;
            prev_cost = cost;
        }

        if status != SolveStatus::Converged {
            if let Some((bz, bc, bv)) = best {
                z = bz;
                cost = bc;
                violation = bv;
                status = SolveStatus::BudgetExhaustedFeasible;
            } else {
                status = SolveStatus::Infeasible;
            }
            if interrupted {
                log::debug!("solve interrupted after {outer} outer iterations");
            }
        }

        Ok(NlpSolution {
            z,
            cost,
            status,
            max_violation: violation,
            eq_multipliers: lambda,
            ineq_multipliers: mu,
            penalty: rho,
            outer_iterations: outer,
            inner_iterations: inner_total,
            interrupted,
            elapsed: started.elapsed().as_secs_f64(),
        })
    }

    /// Returns (iterations, final projected-gradient norm, interrupted).
    fn minimize_inner<P: NlpProblem + ?Sized>(
        &self,
        problem: &P,
        st: &State<'_>,
        z: &mut Vec<f64>,
        omega: f64,
        work_done: usize,
        out_of_time: &dyn Fn(usize) -> bool,
    ) -> Result<(usize, f64, bool)> {
        let n = problem.dim();
        let (lo, hi) = (problem.lower_bounds(), problem.upper_bounds());
        let mut current = st.merit(problem, z)?;
        let mut damping = 1e-6;
        let mut stationarity = f64::INFINITY;

        for it in 0..self.options.max_inner {
            if out_of_time(work_done + it) {
                return Ok((it, stationarity, true));
            }
            let jac = problem.jacobian(z)?;
            let mut grad = problem.cost_gradient(z);
            let mut hess = DMatrix::<f64>::zeros(n, n);
            for (i, c) in problem.cost_curvature(z).into_iter().enumerate() {
                hess[(i, i)] = c;
            }
            let mut accumulate = |row: &SparseRow, weight: f64, grad: &mut Vec<f64>| {
                for &(a, va) in &row.entries {
                    grad[a] += weight * va;
                    for &(b, vb) in &row.entries {
                        hess[(a, b)] += st.rho * va * vb;
                    }
                }
            };
            for (i, row) in jac.eq.iter().enumerate() {
                let w = st.lambda[i] + st.rho * current.cons.eq[i];
                accumulate(row, w, &mut grad);
            }
            for (j, row) in jac.ineq.iter().enumerate() {
                let w = st.mu[j] + st.rho * current.cons.ineq[j];
                if w > 0.0 {
                    accumulate(row, w, &mut grad);
                }
            }

            // projected gradient and free set
            let mut free = Vec::with_capacity(n);
            stationarity = 0.0;
            for i in 0..n {
                let pg = z[i] - (z[i] - grad[i]).clamp(lo[i], hi[i]);
                stationarity = stationarity.max(pg.abs());
                let at_lo = z[i] <= lo[i] && grad[i] > 0.0;
                let at_hi = z[i] >= hi[i] && grad[i] < 0.0;
                if !(at_lo || at_hi) {
                    free.push(i);
                }
            }
            if stationarity <= omega || free.is_empty() {
                return Ok((it, stationarity, false));
            }

            let m = free.len();
            let rhs = DVector::from_iterator(m, free.iter().map(|&i| -grad[i]));
            let mut accepted = false;
            for _attempt in 0..12 {
                let mut h = DMatrix::<f64>::from_fn(m, m, |r, c| hess[(free[r], free[c])]);
                let scale = (0..m).fold(1e-12f64, |s, i| s.max(h[(i, i)].abs()));
                for i in 0..m {
                    h[(i, i)] += damping * scale.max(1.0) + 1e-12;
                }
                let Some(chol) = h.cholesky() else {
                    damping *= 10.0;
                    continue;
                };
                let d = chol.solve(&rhs);

                let mut step = 1.0;
                while step > 1e-8 {
                    let mut trial = z.clone();
                    for (k, &i) in free.iter().enumerate() {
                        trial[i] += step * d[k];
                    }
                    project(&mut trial, lo, hi);
                    let dec: f64 = (0..n).map(|i| grad[i] * (trial[i] - z[i])).sum();
                    let cand = st.merit(problem, &trial)?;
                    if cand.value <= current.value + 1e-4 * dec.min(0.0) && cand.value.is_finite() {
                        let small = (current.value - cand.value).abs() <= 1e-15 * current.value.abs().max(1.0);
                        *z = trial;
                        current = cand;
                        accepted = true;
                        if step == 1.0 {
                            damping = (damping / 3.0).max(1e-12);
                        } else {
                            damping = (damping * 2.0).min(1e6);
                        }
                        if small {
                            return Ok((it + 1, stationarity, false));
                        }
                        break;
                    }
                    step *= 0.5;
                }
                if accepted {
                    break;
                }
                damping = (damping * 10.0).min(1e8);
            }
            if !accepted {
                return Ok((it + 1, stationarity, false));
            }
        }
        Ok((self.options.max_inner, stationarity, false))
    }
}
