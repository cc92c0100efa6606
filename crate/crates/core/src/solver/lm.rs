//! Levenberg–Marquardt for square, over- and underdetermined systems.
//!
//! Steps solve `(JᵀJ + λI) δ = −Jᵀr`. The damping starts at
//! `1e-3 · max diag(JᵀJ)` and follows the gain ratio: shrink by 3 above
//! 0.75, double below 0.25, double and retry on rejection.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{SolverOptions, SolverTrace, Termination};
use crate::math::max_abs;
use crate::{Error, Result};

const DAMPING_SCALE: f64 = 1e-3;
const DAMPING_CAP: f64 = 1e16;

/// A residual map `r: R^n → R^m` with analytic Jacobian.
pub trait ResidualProblem {
    fn num_vars(&self) -> usize;
    fn num_residuals(&self) -> usize;
    /// Writes `r(x)`; when `jac` is given, also the `m × n` Jacobian.
    fn residuals(&self, x: &[f64], r: &mut [f64], jac: Option<&mut DMatrix<f64>>);
}

fn half_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Runs damped Gauss–Newton from `x0`.
///
/// Terminates with [`Termination::Converged`] once `‖r‖∞ ≤ tol_eq`, with
/// [`Termination::Stationary`] once `‖Jᵀr‖∞ ≤ tol_obj` at a non-zero residual.
/// The iteration budget is `max_inner`.
pub fn lm_root<P: ResidualProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolverTrace)> {
    opts.validate()?;
    let n = problem.num_vars();
    let m = problem.num_residuals();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    let mut jac = DMatrix::zeros(m, n);
    problem.residuals(&x, &mut r, Some(&mut jac));
    if r.iter().chain(jac.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("residual at the initial point".into()));
    }
    let mut cost = half_sq(&r);
    let mut trace = SolverTrace {
        outer_iterations: 0,
        inner_iterations: 0,
        objective: cost,
        max_eq_violation: max_abs(&r),
        max_ineq_violation: 0.0,
        stationarity: f64::INFINITY,
        final_penalty: 0.0,
        termination: Termination::MaxIterations,
        converged: false,
    };
    if max_abs(&r) <= opts.tol_eq {
        trace.termination = Termination::Converged;
        trace.converged = true;
        trace.stationarity = 0.0;
        return Ok((x, trace));
    }

    let mut normal = jac.transpose() * &jac;
    let mut gradient = jac.transpose() * DVector::from_column_slice(&r);
    let max_diag = normal.diagonal().amax();
    if max_diag == 0.0 {
        return Err(Error::RankCollapse(format!(
            "jacobian vanishes at the initial point (residual {:e})",
            max_abs(&r)
        )));
    }
    let mut lambda = DAMPING_SCALE * max_diag;
    let mut trial = vec![0.0; n];
    let mut trial_r = vec![0.0; m];

    for iter in 0..opts.max_inner {
        trace.outer_iterations = iter + 1;
        trace.stationarity = gradient.amax();
        if trace.stationarity <= opts.tol_obj {
            trace.termination = Termination::Stationary;
            trace.converged = true;
            break;
        }
        let mut damped = normal.clone();
        for i in 0..n {
            damped[(i, i)] += lambda;
        }
        trace.inner_iterations += 1;
        let Some(chol) = damped.cholesky() else {
            lambda *= 2.0;
            if lambda > DAMPING_CAP {
                trace.termination = Termination::Stalled;
                break;
            }
            continue;
        };
        let step = -chol.solve(&gradient);
        let step_norm = step.amax();
        let x_norm = max_abs(&x);
        if step_norm <= f64::EPSILON * (x_norm + f64::EPSILON) {
            trace.termination = Termination::Stalled;
            break;
        }
        for i in 0..n {
            trial[i] = x[i] + step[i];
        }
        problem.residuals(&trial, &mut trial_r, None);
        let trial_cost = half_sq(&trial_r);
        // Predicted decrease of the local quadratic model: ½ δᵀ(λδ − g).
        let predicted = 0.5 * step.dot(&(lambda * &step - &gradient));
        let rho = if trial_cost.is_finite() && predicted > 0.0 {
            (cost - trial_cost) / predicted
        } else {
            -1.0
        };
        if rho > 0.0 {
            x.copy_from_slice(&trial);
            problem.residuals(&x, &mut r, Some(&mut jac));
            cost = half_sq(&r);
            normal = jac.transpose() * &jac;
            gradient = jac.transpose() * DVector::from_column_slice(&r);
            if rho > 0.75 {
                lambda /= 3.0;
            } else if rho < 0.25 {
                lambda *= 2.0;
            }
            if max_abs(&r) <= opts.tol_eq {
                trace.termination = Termination::Converged;
                trace.converged = true;
                trace.stationarity = gradient.amax();
                break;
            }
        } else {
            lambda *= 2.0;
            if lambda > DAMPING_CAP {
                trace.termination = Termination::Stalled;
                break;
            }
        }
    }
    trace.objective = cost;
    trace.max_eq_violation = max_abs(&r);
    Ok((x, trace))
}
