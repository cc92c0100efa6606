//! Augmented-Lagrangian maximization with BFGS inner solves.
//!
//! Equalities `c(x) = 0` enter with multipliers `λ` and a quadratic penalty.
//! Inequalities `g(x) ≤ 0` enter through the shifted squared hinge
//! `max(0, ν + μ g)²`, which is the usual first-order multiplier form for
//! inequality constraints. Both share the penalty `μ`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{SolverOptions, SolverTrace, Termination};
use crate::math::max_abs;
use crate::{Error, Result};

const PENALTY_CAP: f64 = 1e12;
const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
// The largest coordinate change proposed by one inner step.
const MAX_STEP: f64 = 1.0;
// Outer iterations must reduce infeasibility by this factor or the penalty grows.
const FEASIBILITY_DECREASE: f64 = 0.25;

/// Coordinate-format Jacobian; entries for the same `(row, col)` add up.
#[derive(Clone, Debug, Default)]
pub struct SparseJacobian {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseJacobian {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// `out += Jᵀ v`.
    pub fn add_transpose_mul(&self, v: &[f64], out: &mut [f64]) {
        for &(r, c, val) in &self.entries {
            out[c] += val * v[r];
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

/// A smooth maximization problem with equality and `g ≤ 0` inequality constraints.
pub trait ConstrainedProblem {
    fn num_vars(&self) -> usize;
    fn num_eq(&self) -> usize;
    fn num_ineq(&self) -> usize;
    /// Value of the objective to maximize; writes its gradient into `grad`.
    fn objective(&self, x: &[f64], grad: &mut [f64]) -> f64;
    fn equalities(&self, x: &[f64], values: &mut [f64], jac: &mut SparseJacobian);
    fn inequalities(&self, x: &[f64], values: &mut [f64], jac: &mut SparseJacobian);
}

struct Workspace {
    c: Vec<f64>,
    g: Vec<f64>,
    jc: SparseJacobian,
    jg: SparseJacobian,
    shifted: Vec<f64>,
}

impl Workspace {
    fn new<P: ConstrainedProblem + ?Sized>(p: &P) -> Self {
        let n = p.num_vars();
        Self {
            c: vec![0.0; p.num_eq()],
            g: vec![0.0; p.num_ineq()],
            jc: SparseJacobian::new(p.num_eq(), n),
            jg: SparseJacobian::new(p.num_ineq(), n),
            shifted: vec![0.0; p.num_eq().max(p.num_ineq())],
        }
    }

    fn constraints<P: ConstrainedProblem + ?Sized>(&mut self, p: &P, x: &[f64]) {
        self.jc.clear();
        self.jg.clear();
        p.equalities(x, &mut self.c, &mut self.jc);
        p.inequalities(x, &mut self.g, &mut self.jg);
    }
}

struct Multipliers<'a> {
    lambda: &'a [f64],
    nu: &'a [f64],
    mu: f64,
}

// Augmented Lagrangian of the *negated* objective, and its gradient.
fn merit<P: ConstrainedProblem + ?Sized>(
    p: &P,
    ws: &mut Workspace,
    m: &Multipliers<'_>,
    x: &[f64],
    grad: &mut [f64],
) -> f64 {
    let f = p.objective(x, grad);
    for v in grad.iter_mut() {
        *v = -*v;
    }
    ws.constraints(p, x);
    let mut value = -f;
    let ne = ws.c.len();
    for k in 0..ne {
        let ck = ws.c[k];
        value += m.lambda[k] * ck + 0.5 * m.mu * ck * ck;
        ws.shifted[k] = m.lambda[k] + m.mu * ck;
    }
    ws.jc.add_transpose_mul(&ws.shifted[..ne], grad);
    let ni = ws.g.len();
    for j in 0..ni {
        let s = (m.nu[j] + m.mu * ws.g[j]).max(0.0);
        value += (s * s - m.nu[j] * m.nu[j]) / (2.0 * m.mu);
        ws.shifted[j] = s;
    }
    ws.jg.add_transpose_mul(&ws.shifted[..ni], grad);
    value
}

struct InnerOutcome {
    iterations: usize,
    grad_norm: f64,
    stalled: bool,
}

// BFGS with Armijo backtracking. Accepts steps that fail Armijo only by
// floating-point noise so the gradient can be driven below sqrt(eps).
fn bfgs<F>(x: &mut [f64], mut eval: F, tol: f64, max_iter: usize) -> Result<InnerOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut f = eval(x, &mut grad);
    if !f.is_finite() {
        return Err(Error::NonFinite(
            "augmented Lagrangian at inner start".into(),
        ));
    }
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut h_is_identity = true;
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut iterations = 0;
    let mut stalled = false;

    while iterations < max_iter {
        let gnorm = max_abs(&grad);
        if gnorm <= tol {
            break;
        }
        iterations += 1;
        let g = DVector::from_column_slice(&grad);
        let mut dir = -(&h * &g);
        let mut slope = dir.dot(&g);
        if !(slope < 0.0) {
            h.fill_with_identity();
            h_is_identity = true;
            dir = -g.clone();
            slope = -g.dot(&g);
        }
        let dmax = dir.amax();
        let mut alpha = if dmax > MAX_STEP {
            MAX_STEP / dmax
        } else {
            1.0
        };
        let noise = 8.0 * f64::EPSILON * f.abs().max(1.0);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                trial[i] = x[i] + alpha * dir[i];
            }
            let ft = eval(&trial, &mut trial_grad);
            if ft.is_finite() && ft <= f + ARMIJO_C * alpha * slope + noise {
                accepted = Some(ft);
                break;
            }
            alpha *= BACKTRACK;
        }
        let Some(ft) = accepted else {
            if h_is_identity {
                stalled = true;
                break;
            }
            h.fill_with_identity();
            h_is_identity = true;
            continue;
        };
        let s = DVector::from_iterator(n, (0..n).map(|i| trial[i] - x[i]));
        let y = DVector::from_iterator(n, (0..n).map(|i| trial_grad[i] - grad[i]));
        x.copy_from_slice(&trial);
        grad.copy_from_slice(&trial_grad);
        let f_prev = f;
        f = ft;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if h_is_identity {
                h *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← H − ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            h.ger(-rho, &hy, &s, 1.0);
            h.ger(-rho, &s, &hy, 1.0);
            h.ger(rho * rho * yhy + rho, &s, &s, 1.0);
            h_is_identity = false;
        }
        if s.amax() == 0.0 && f == f_prev {
            stalled = true;
            break;
        }
    }
    Ok(InnerOutcome {
        iterations,
        grad_norm: max_abs(&grad),
        stalled,
    })
}

/// State after one outer (multiplier) iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuterStep {
    pub outer: usize,
    /// Max of equality, inequality, and complementarity violation.
    pub infeasibility: f64,
    /// Penalty used by this iteration's inner solve.
    pub penalty: f64,
    /// Whether the penalty grows for the next iteration.
    pub penalty_increased: bool,
}

/// Maximizes `problem.objective` subject to its constraints, starting at `x0`.
///
/// Never panics on non-convergence: the last iterate is returned with
/// `converged = false`. A non-finite objective or constraint at `x0` is an error.
pub fn maximize_constrained<P: ConstrainedProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolverTrace)> {
    maximize_constrained_observed(problem, x0, opts, |_| {})
}

/// [`maximize_constrained`], reporting every outer iteration to `observe`.
pub fn maximize_constrained_observed<P: ConstrainedProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    opts: &SolverOptions,
    mut observe: impl FnMut(OuterStep),
) -> Result<(Vec<f64>, SolverTrace)> {
    opts.validate()?;
    let n = problem.num_vars();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial point".into()));
    }
    let mut ws = Workspace::new(problem);
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let f0 = problem.objective(&x, &mut grad);
    ws.constraints(problem, &x);
    if !f0.is_finite() || ws.c.iter().chain(&ws.g).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(
            "objective or constraints at the initial point".into(),
        ));
    }

    let mut lambda = vec![0.0; problem.num_eq()];
    let mut nu = vec![0.0; problem.num_ineq()];
    let mut mu = opts.penalty_init;
    let mut omega = (1.0 / mu).max(opts.tol_obj);
    let mut prev_infeas = f64::INFINITY;
    let mut inner_total = 0;
    let mut trace = SolverTrace {
        outer_iterations: 0,
        inner_iterations: 0,
        objective: f0,
        max_eq_violation: max_abs(&ws.c),
        max_ineq_violation: ws.g.iter().fold(0.0f64, |m, v| m.max(*v)),
        stationarity: f64::INFINITY,
        final_penalty: mu,
        termination: Termination::MaxIterations,
        converged: false,
    };

    for outer in 0..opts.max_outer {
        let (lam_snapshot, nu_snapshot) = (lambda.clone(), nu.clone());
        let mult = Multipliers {
            lambda: &lam_snapshot,
            nu: &nu_snapshot,
            mu,
        };
        let inner = bfgs(
            &mut x,
            |z, gr| merit(problem, &mut ws, &mult, z, gr),
            omega,
            opts.max_inner,
        )?;
        inner_total += inner.iterations;

        let f = problem.objective(&x, &mut grad);
        ws.constraints(problem, &x);
        let eq_viol = max_abs(&ws.c);
        let ineq_viol = ws.g.iter().fold(0.0f64, |m, v| m.max(*v));
        // Complementarity against the multipliers used in this inner solve.
        let compl =
            ws.g.iter()
                .zip(&nu)
                .fold(0.0f64, |m, (g, v)| m.max((-g).min(v / mu)));
        let infeas = eq_viol.max(ineq_viol).max(compl);

        for (l, c) in lambda.iter_mut().zip(&ws.c) {
            *l += mu * c;
        }
        for (v, g) in nu.iter_mut().zip(&ws.g) {
            *v = (*v + mu * g).max(0.0);
        }
        // After the update the merit gradient equals the Lagrangian gradient,
        // which the inner solve drove below omega.
        let stationarity = inner.grad_norm;

        trace.outer_iterations = outer + 1;
        trace.inner_iterations = inner_total;
        trace.objective = f;
        trace.max_eq_violation = eq_viol;
        trace.max_ineq_violation = ineq_viol;
        trace.stationarity = stationarity;
        trace.final_penalty = mu;

        let converged = infeas <= opts.tol_eq && stationarity <= opts.tol_obj;
        let stalled = inner.stalled && infeas <= opts.tol_eq && omega <= opts.tol_obj;
        let grow = !converged && !stalled && infeas > FEASIBILITY_DECREASE * prev_infeas;
        observe(OuterStep {
            outer,
            infeasibility: infeas,
            penalty: mu,
            penalty_increased: grow && mu < PENALTY_CAP,
        });
        if converged {
            trace.termination = Termination::Converged;
            trace.converged = true;
            return Ok((x, trace));
        }
        if stalled {
            trace.termination = Termination::Stalled;
            return Ok((x, trace));
        }
        if grow {
            mu = (mu * opts.penalty_growth).min(PENALTY_CAP);
        }
        prev_infeas = infeas;
        omega = (omega * 0.1).max(opts.tol_obj);
    }
    Ok((x, trace))
}
