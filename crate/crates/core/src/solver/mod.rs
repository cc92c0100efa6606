//! Generic numerical machinery: a constrained maximizer, a damped
//! Gauss–Newton root/least-squares solver, and finite-difference oracles.
//!
//! Callers supply analytic derivatives. [`fd`] exists to check them.

mod alm;
pub mod fd;
mod lm;

pub use alm::{
    maximize_constrained, maximize_constrained_observed, ConstrainedProblem, OuterStep,
    SparseJacobian,
};
pub use lm::{lm_root, ResidualProblem};

use crate::{Error, Result};
use alloc::format;

/// Tunables shared by every solver in the crate.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SolverOptions {
    /// Tolerance on equality residuals and inequality violations.
    pub tol_eq: f64,
    /// Tolerance on the Lagrangian gradient (stationarity).
    pub tol_obj: f64,
    /// Multiplicative slack on collision constraints: `d_i + d_j ≤ (1 − ε)‖x_i − x_j‖`.
    #[cfg_attr(feature = "serde", serde(alias = "ε_slack"))]
    pub eps_slack: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub seed: u64,
    /// Number of random initializations tried by the problem-level solvers.
    pub restarts: usize,
    /// Optional upper bound on every diameter.
    pub d_max: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_eq: 1e-6,
            tol_obj: 1e-8,
            eps_slack: 1e-3,
            max_outer: 50,
            max_inner: 500,
            penalty_init: 10.0,
            penalty_growth: 5.0,
            seed: 0,
            restarts: 5,
            d_max: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_eq", self.tol_eq),
            ("tol_obj", self.tol_obj),
            ("penalty_init", self.penalty_init),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.eps_slack >= 0.0 && self.eps_slack < 1.0) {
            return Err(Error::InvalidInput(format!(
                "eps_slack must lie in [0, 1), got {}",
                self.eps_slack
            )));
        }
        if !(self.penalty_growth > 1.0) {
            return Err(Error::InvalidInput("penalty_growth must exceed 1".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidInput(
                "iteration limits must be positive".into(),
            ));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidInput("restarts must be at least 1".into()));
        }
        if let Some(d) = self.d_max {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "d_max must be positive, got {d}"
                )));
            }
        }
        Ok(())
    }
}

/// Why a solver stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Termination {
    /// Constraints (or the residual) within `tol_eq` and stationarity within `tol_obj`.
    Converged,
    /// Stationary point of a least-squares objective with non-zero residual.
    Stationary,
    MaxIterations,
    /// No further progress possible in floating point.
    Stalled,
}

/// Diagnostics reported alongside every solver result.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverTrace {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub objective: f64,
    pub max_eq_violation: f64,
    pub max_ineq_violation: f64,
    pub stationarity: f64,
    pub final_penalty: f64,
    pub termination: Termination,
    pub converged: bool,
}
