//! Problem assembly: which determinedness case a moment table falls into,
//! and the solvers for each.
//!
//! The maximum-entropy solve optimizes locations and log-radii jointly:
//! maximize the entropy of the disjoint-sphere density subject to the
//! moment equalities and the collision inequalities. In symmetric mode only
//! master components are variables; each master `m` has a slave at
//! `2μ − m` with the same weight and radius, which fixes the mean at `μ`.
//! Expanded mixtures interleave masters and slaves, `[m_0, s_0, m_1, s_1, …]`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math::{exp, ln, sq_dist, sqrt};
use crate::moments::{
    dirac_moments, power_sum_gradient, power_sums, residual, DiracMixture, MomentTable, Weighting,
};
use crate::multiindex::MultiIndex;
use crate::pwc::{
    collision_pairs, enforce_disjoint, entropy, log_unit_ball_volume, max_entropy_diameters,
    nearest_neighbor_diameters,
};
use crate::solver::{
    lm_root, maximize_constrained, ConstrainedProblem, ResidualProblem, SolverOptions, SolverTrace,
    SparseJacobian, Termination,
};
use crate::{Error, Result};

const INIT_ATTEMPTS: usize = 100;
const MIN_INIT_SEPARATION: f64 = 1e-9;
const DISTANCE_FLOOR: f64 = 1e-12;

/// Relation between free location parameters `L·N` and specified moments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Case {
    Overdetermined,
    FullyDetermined,
    Underdetermined,
}

/// Requested solution method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Method {
    /// Max-entropy when underdetermined, root solve when fully determined,
    /// least squares when overdetermined.
    #[default]
    Auto,
    MaxEnt,
    Lm,
}

/// The solver that actually produced a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Strategy {
    MaxEntropy,
    LmBaseline,
    LeastSquares,
    RootSolve,
}

/// A moment-matching problem for an `L`-component Dirac mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct DmaProblem {
    pub dim: usize,
    pub components: usize,
    pub target: MomentTable,
    pub symmetric: bool,
    /// Prescribed mean; required in symmetric mode.
    pub mean: Option<Vec<f64>>,
    /// Component weights in expanded order; equal weights when `None`.
    pub weights: Option<Vec<f64>>,
    /// Residual weighting for the least-squares case.
    pub weighting: Weighting,
    pub options: SolverOptions,
}

impl DmaProblem {
    pub fn new(components: usize, target: MomentTable) -> Self {
        Self {
            dim: target.dim(),
            components,
            target,
            symmetric: false,
            mean: None,
            weights: None,
            weighting: Weighting::Uniform,
            options: SolverOptions::default(),
        }
    }

    pub fn symmetric_about(mut self, mean: Vec<f64>) -> Self {
        self.symmetric = true;
        self.mean = Some(mean);
        self
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim != self.target.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.target.dim(),
            });
        }
        if self.components == 0 {
            return Err(Error::InvalidInput("L must be at least 1".into()));
        }
        if let Some(v) = self.target.get(&MultiIndex::zero(self.dim)) {
            if v != 1.0 {
                return Err(Error::InvalidInput(format!(
                    "zero-order target must be 1, got {v}"
                )));
            }
        }
        if self.symmetric {
            if self.components % 2 != 0 {
                return Err(Error::InvalidInput("symmetric mode needs an even L".into()));
            }
            match &self.mean {
                None => {
                    return Err(Error::InvalidInput(
                        "symmetric mode needs a prescribed mean".into(),
                    ))
                }
                Some(m) if m.len() != self.dim => {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: m.len(),
                    })
                }
                _ => {}
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.components {
                return Err(Error::DimensionMismatch {
                    expected: self.components,
                    found: w.len(),
                });
            }
            if self.symmetric && w.chunks(2).any(|p| p[0] != p[1]) {
                return Err(Error::InvalidInput(
                    "symmetric mode needs equal master/slave weights".into(),
                ));
            }
            let total: f64 = w.iter().sum();
            if w.iter().any(|v| !(*v > 0.0)) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(
                    "weights must be positive and sum to 1".into(),
                ));
            }
        }
        self.options.validate()
    }

    fn expanded_weights(&self) -> Vec<f64> {
        self.weights
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.components as f64; self.components])
    }
}

/// Compares `L·N` with the number of specified target entries.
pub fn classify(problem: &DmaProblem) -> Case {
    let params = problem.components * problem.dim;
    let targets = problem.target.len();
    match params.cmp(&targets) {
        core::cmp::Ordering::Less => Case::Overdetermined,
        core::cmp::Ordering::Equal => Case::FullyDetermined,
        core::cmp::Ordering::Greater => Case::Underdetermined,
    }
}

/// Standard-normal initial locations for the free components (masters in
/// symmetric mode, offset by the prescribed mean). `stream` selects an
/// independent substream of `seed`.
pub fn init_random(
    seed: u64,
    stream: u64,
    components: usize,
    dim: usize,
    symmetric: bool,
    mean: Option<&[f64]>,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    draw_free(&mut rng, components, dim, symmetric, mean)
}

fn draw_free(
    rng: &mut ChaCha8Rng,
    components: usize,
    dim: usize,
    symmetric: bool,
    mean: Option<&[f64]>,
) -> Vec<f64> {
    let free = if symmetric {
        components / 2
    } else {
        components
    };
    let mut out: Vec<f64> = (0..free * dim)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    if symmetric {
        if let Some(mu) = mean {
            for (i, v) in out.iter_mut().enumerate() {
                *v += mu[i % dim];
            }
        }
    }
    out
}

/// Reflects masters through `mean` and interleaves them with their slaves.
///
/// Fails when a master sits on the mean, where it would coincide with its
/// own reflection, or when two expanded components coincide.
pub fn expand_symmetric(
    masters: &[f64],
    mean: &[f64],
    weights: Option<&[f64]>,
) -> Result<DiracMixture> {
    let dim = mean.len();
    if dim == 0 || masters.is_empty() || masters.len() % dim != 0 {
        return Err(Error::InvalidInput(
            "masters must hold at least one point of the mean's dimension".into(),
        ));
    }
    let half = masters.len() / dim;
    for i in 0..half {
        if sq_dist(&masters[i * dim..(i + 1) * dim], mean) == 0.0 {
            return Err(Error::Degenerate(format!("master {i} lies on the mean")));
        }
    }
    let locations = reflect_interleaved(masters, mean);
    let weights = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0 / (2 * half) as f64; 2 * half],
    };
    DiracMixture::new(dim, locations, weights)
}

fn reflect_interleaved(masters: &[f64], mean: &[f64]) -> Vec<f64> {
    let dim = mean.len();
    let half = masters.len() / dim;
    let mut out = Vec::with_capacity(2 * masters.len());
    for i in 0..half {
        let m = &masters[i * dim..(i + 1) * dim];
        out.extend_from_slice(m);
        out.extend(m.iter().zip(mean).map(|(x, mu)| mu - (x - mu)));
    }
    out
}

/// One target moment residual in a report.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualEntry {
    pub index: MultiIndex,
    pub value: f64,
}

/// Result of any problem-level solve.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolutionReport {
    pub strategy: Strategy,
    pub case: Case,
    pub mixture: DiracMixture,
    /// Sphere radii of the max-entropy density for the final locations;
    /// zeros when none exists (coincident points or an unbounded single component).
    pub diameters: Vec<f64>,
    pub entropy: Option<f64>,
    pub moment_residual_norm: f64,
    pub residuals: Vec<ResidualEntry>,
    pub converged: bool,
    pub trace: SolverTrace,
    pub seed: u64,
    pub restart: usize,
    pub message: Option<String>,
}

impl SolutionReport {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.value.abs()))
    }
}

// Maps free variables onto the expanded mixture.
struct Layout {
    dim: usize,
    expanded: usize,
    symmetric: bool,
    mean: Vec<f64>,
    weights: Vec<f64>,
}

impl Layout {
    fn new(problem: &DmaProblem) -> Self {
        Self {
            dim: problem.dim,
            expanded: problem.components,
            symmetric: problem.symmetric,
            mean: problem
                .mean
                .clone()
                .unwrap_or_else(|| vec![0.0; problem.dim]),
            weights: problem.expanded_weights(),
        }
    }

    fn free(&self) -> usize {
        if self.symmetric {
            self.expanded / 2
        } else {
            self.expanded
        }
    }

    // Free component owning expanded component `a`, and the sign of ∂x_a/∂m.
    #[inline]
    fn owner(&self, a: usize) -> (usize, f64) {
        if self.symmetric {
            (a / 2, if a % 2 == 0 { 1.0 } else { -1.0 })
        } else {
            (a, 1.0)
        }
    }

    fn expand(&self, free_locations: &[f64]) -> Vec<f64> {
        if self.symmetric {
            reflect_interleaved(free_locations, &self.mean)
        } else {
            free_locations.to_vec()
        }
    }

    // Σ of expanded weights per free component.
    fn free_weights(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.free()];
        for (a, w) in self.weights.iter().enumerate() {
            out[self.owner(a).0] += w;
        }
        out
    }
}

// The moment equalities shared by the max-entropy and LM formulations.
struct MomentMap<'a> {
    layout: &'a Layout,
    targets: Vec<(MultiIndex, f64, f64)>,
}

impl<'a> MomentMap<'a> {
    fn new(layout: &'a Layout, target: &MomentTable, weighting: Option<&Weighting>) -> Self {
        let targets = target
            .iter()
            .filter(|(k, _)| !k.is_zero())
            .map(|(k, v)| (k.clone(), v, weighting.map_or(1.0, |w| w.weight(k, v))))
            .collect();
        Self { layout, targets }
    }

    fn len(&self) -> usize {
        self.targets.len()
    }

    // Residuals and, per row, the gradient w.r.t. free location coordinates.
    fn eval(
        &self,
        free_locations: &[f64],
        values: &mut [f64],
        mut row_grad: impl FnMut(usize, &[f64]),
    ) {
        let lay = self.layout;
        let x = lay.expand(free_locations);
        let mut grad_exp = vec![0.0; x.len()];
        let mut grad_free = vec![0.0; free_locations.len()];
        for (row, (k, t, w)) in self.targets.iter().enumerate() {
            values[row] = w * (power_sums(lay.dim, &x, &lay.weights, k) - t);
            power_sum_gradient(lay.dim, &x, &lay.weights, k, &mut grad_exp);
            grad_free.iter_mut().for_each(|g| *g = 0.0);
            for a in 0..lay.expanded {
                let (i, sign) = lay.owner(a);
                for c in 0..lay.dim {
                    grad_free[i * lay.dim + c] += sign * w * grad_exp[a * lay.dim + c];
                }
            }
            row_grad(row, &grad_free);
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Pair {
    // Scalar neighbours in a fixed order: x_lo < x_hi.
    Ordered { lo: usize, hi: usize },
    Euclidean { a: usize, b: usize },
}

struct JointProblem<'a> {
    layout: &'a Layout,
    moments: MomentMap<'a>,
    pairs: Vec<Pair>,
    free_weights: Vec<f64>,
    slack: f64,
    log_d_max: Option<f64>,
}

impl<'a> JointProblem<'a> {
    fn new(problem: &DmaProblem, layout: &'a Layout, expanded_init: &[f64]) -> Self {
        Self {
            layout,
            moments: MomentMap::new(layout, &problem.target, None),
            pairs: joint_pairs(layout, expanded_init),
            free_weights: layout.free_weights(),
            slack: problem.options.eps_slack,
            log_d_max: problem.options.d_max.map(ln),
        }
    }

    fn split<'x>(&self, z: &'x [f64]) -> (&'x [f64], &'x [f64]) {
        z.split_at(self.layout.free() * self.layout.dim)
    }
}

// Pairs of expanded components that need a collision constraint.
fn joint_pairs(layout: &Layout, expanded_init: &[f64]) -> Vec<Pair> {
    let dim = layout.dim;
    let l = layout.expanded;
    if dim == 1 {
        return collision_pairs(1, expanded_init)
            .into_iter()
            .map(|(lo, hi)| Pair::Ordered { lo, hi })
            .collect();
    }
    if !layout.symmetric {
        return (0..l)
            .flat_map(|a| (a + 1..l).map(move |b| Pair::Euclidean { a, b }))
            .collect();
    }
    // Reflection maps (m_i, m_j) onto (s_i, s_j) and (m_i, s_j) onto (s_i, m_j),
    // so masters against masters, masters against slaves, and each master
    // against its own slave cover every distinct constraint.
    let half = l / 2;
    let mut out = Vec::new();
    for i in 0..half {
        out.push(Pair::Euclidean {
            a: 2 * i,
            b: 2 * i + 1,
        });
        for j in i + 1..half {
            out.push(Pair::Euclidean { a: 2 * i, b: 2 * j });
            out.push(Pair::Euclidean {
                a: 2 * i,
                b: 2 * j + 1,
            });
        }
    }
    out
}

impl ConstrainedProblem for JointProblem<'_> {
    fn num_vars(&self) -> usize {
        self.layout.free() * (self.layout.dim + 1)
    }
    fn num_eq(&self) -> usize {
        self.moments.len()
    }
    fn num_ineq(&self) -> usize {
        self.pairs.len()
            + if self.log_d_max.is_some() {
                self.layout.free()
            } else {
                0
            }
    }

    fn objective(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let lay = self.layout;
        let (locs, logd) = self.split(z);
        let n = lay.dim as f64;
        let mut value = log_unit_ball_volume(lay.dim);
        for (a, &w) in lay.weights.iter().enumerate() {
            value -= w * (ln(w) - n * logd[lay.owner(a).0]);
        }
        grad[..locs.len()].iter_mut().for_each(|g| *g = 0.0);
        for (i, w) in self.free_weights.iter().enumerate() {
            grad[locs.len() + i] = n * w;
        }
        value
    }

    fn equalities(&self, z: &[f64], values: &mut [f64], jac: &mut SparseJacobian) {
        let (locs, _) = self.split(z);
        self.moments.eval(locs, values, |row, g| {
            for (c, &v) in g.iter().enumerate() {
                jac.push(row, c, v);
            }
        });
    }

    fn inequalities(&self, z: &[f64], values: &mut [f64], jac: &mut SparseJacobian) {
        let lay = self.layout;
        let dim = lay.dim;
        let (locs, logd) = self.split(z);
        let base = locs.len();
        let x = lay.expand(locs);
        let shrink = 1.0 - self.slack;
        for (row, pair) in self.pairs.iter().enumerate() {
            let (a, b) = match *pair {
                Pair::Ordered { lo, hi } => (lo, hi),
                Pair::Euclidean { a, b } => (a, b),
            };
            let (ia, sa) = lay.owner(a);
            let (ib, sb) = lay.owner(b);
            let (da, db) = (exp(logd[ia]), exp(logd[ib]));
            jac.push(row, base + ia, da);
            jac.push(row, base + ib, db);
            match *pair {
                Pair::Ordered { .. } => {
                    values[row] = da + db - shrink * (x[b] - x[a]);
                    jac.push(row, ia, sa * shrink);
                    jac.push(row, ib, -sb * shrink);
                }
                Pair::Euclidean { .. } => {
                    let xa = &x[a * dim..(a + 1) * dim];
                    let xb = &x[b * dim..(b + 1) * dim];
                    let dist = sqrt(sq_dist(xa, xb));
                    values[row] = da + db - shrink * dist;
                    let denom = dist.max(DISTANCE_FLOOR);
                    for c in 0..dim {
                        let u = (xa[c] - xb[c]) / denom;
                        jac.push(row, ia * dim + c, -shrink * sa * u);
                        jac.push(row, ib * dim + c, shrink * sb * u);
                    }
                }
            }
        }
        if let Some(cap) = self.log_d_max {
            let offset = self.pairs.len();
            for i in 0..lay.free() {
                values[offset + i] = logd[i] - cap;
                jac.push(offset + i, base + i, 1.0);
            }
        }
    }
}

/// Dense evaluation of the joint max-entropy formulation.
///
/// Variables are `z = [free locations (row-major), log-radii of free
/// components]`; free components are the masters in symmetric mode.
/// Equalities are `e_κ(x) − ẽ_κ` over the non-zero target indices;
/// inequalities are `d_a + d_b − (1 − ε)·dist(a, b) ≤ 0` per collision pair,
/// then `log d − log d_max ≤ 0` when a cap is set.
#[derive(Clone, Debug, PartialEq)]
pub struct JointEvaluation {
    pub objective: f64,
    pub objective_gradient: Vec<f64>,
    pub equalities: Vec<f64>,
    pub equality_jacobian: DMatrix<f64>,
    pub inequalities: Vec<f64>,
    pub inequality_jacobian: DMatrix<f64>,
}

/// Number of joint variables, `free · (N + 1)`.
pub fn joint_dimension(problem: &DmaProblem) -> usize {
    let layout = Layout::new(problem);
    layout.free() * (layout.dim + 1)
}

/// Evaluates the joint formulation at `z`. Scalar collision pairs follow
/// the sorted order of the locations in `z`.
pub fn evaluate_joint(problem: &DmaProblem, z: &[f64]) -> Result<JointEvaluation> {
    problem.validate()?;
    let layout = Layout::new(problem);
    let n = layout.free() * (layout.dim + 1);
    if z.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: z.len(),
        });
    }
    let expanded = layout.expand(&z[..layout.free() * layout.dim]);
    let joint = JointProblem::new(problem, &layout, &expanded);
    let mut objective_gradient = vec![0.0; n];
    let objective = joint.objective(z, &mut objective_gradient);
    let mut equalities = vec![0.0; joint.num_eq()];
    let mut jac = SparseJacobian::new(joint.num_eq(), n);
    joint.equalities(z, &mut equalities, &mut jac);
    let equality_jacobian = jac.to_dense();
    let mut inequalities = vec![0.0; joint.num_ineq()];
    let mut jac = SparseJacobian::new(joint.num_ineq(), n);
    joint.inequalities(z, &mut inequalities, &mut jac);
    Ok(JointEvaluation {
        objective,
        objective_gradient,
        equalities,
        equality_jacobian,
        inequalities,
        inequality_jacobian: jac.to_dense(),
    })
}

struct LmProblem<'a> {
    moments: MomentMap<'a>,
    vars: usize,
}

impl ResidualProblem for LmProblem<'_> {
    fn num_vars(&self) -> usize {
        self.vars
    }
    fn num_residuals(&self) -> usize {
        self.moments.len()
    }
    fn residuals(&self, x: &[f64], r: &mut [f64], jac: Option<&mut DMatrix<f64>>) {
        match jac {
            Some(j) => self.moments.eval(x, r, |row, g| {
                for (c, &v) in g.iter().enumerate() {
                    j[(row, c)] = v;
                }
            }),
            None => self.moments.eval(x, r, |_, _| {}),
        }
    }
}

fn min_separation(dim: usize, locations: &[f64]) -> f64 {
    let l = locations.len() / dim;
    let mut best = f64::INFINITY;
    for i in 0..l {
        for j in i + 1..l {
            best = best.min(sq_dist(
                &locations[i * dim..(i + 1) * dim],
                &locations[j * dim..(j + 1) * dim],
            ));
        }
    }
    sqrt(best)
}

// Draws free locations for restart `restart`, redrawing while the expanded
// mixture has nearly coincident points.
fn initial_locations(problem: &DmaProblem, layout: &Layout, restart: usize) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(problem.options.seed);
    rng.set_stream(restart as u64);
    for _ in 0..INIT_ATTEMPTS {
        let free = draw_free(
            &mut rng,
            problem.components,
            problem.dim,
            problem.symmetric,
            problem.mean.as_deref(),
        );
        if min_separation(layout.dim, &layout.expand(&free)) > MIN_INIT_SEPARATION {
            return Ok(free);
        }
    }
    Err(Error::Degenerate(
        "could not draw separated initial locations".into(),
    ))
}

struct Evaluated {
    mixture: DiracMixture,
    diameters: Vec<f64>,
    entropy: Option<f64>,
    residuals: Vec<ResidualEntry>,
    norm: f64,
    note: Option<String>,
}

// Builds the mixture for final free locations and attaches max-entropy radii.
fn evaluate_locations(
    problem: &DmaProblem,
    layout: &Layout,
    free: &[f64],
    fallback_diameters: Option<Vec<f64>>,
) -> Result<Evaluated> {
    let locations = layout.expand(free);
    let mixture =
        DiracMixture::new_unchecked_distinct(layout.dim, locations, layout.weights.clone())?;
    let actual = dirac_moments(&mixture, problem.target.order());
    let (res, norm) = residual(&actual, &problem.target, None)?;
    let residuals = res
        .into_iter()
        .map(|(index, value)| ResidualEntry { index, value })
        .collect();
    let (diameters, entropy, note) = match max_entropy_diameters(&mixture, &problem.options) {
        Ok(d) => {
            let h = entropy(layout.dim, mixture.weights(), &d);
            (d, Some(h), None)
        }
        Err(err) => match fallback_diameters {
            Some(mut d) if mixture.min_pairwise_distance() > 0.0 => {
                enforce_disjoint(
                    layout.dim,
                    mixture.locations(),
                    &mut d,
                    problem.options.eps_slack,
                    problem.options.d_max,
                );
                let h = entropy(layout.dim, mixture.weights(), &d);
                (
                    d,
                    Some(h),
                    Some(format!(
                        "radius polish failed ({err}); joint radii reported"
                    )),
                )
            }
            _ => (
                vec![0.0; mixture.len()],
                None,
                Some(format!("no disjoint-sphere density: {err}")),
            ),
        },
    };
    Ok(Evaluated {
        mixture,
        diameters,
        entropy,
        residuals,
        norm,
        note,
    })
}

fn unconverged_message(e: &Evaluated, tol: f64) -> String {
    let worst = e.residuals.iter().fold(0.0f64, |m, r| m.max(r.value.abs()));
    if worst > tol {
        format!(
            "moment constraints not met (max residual {worst:e}); the targets may be unreachable \
             with this many components, try a larger L"
        )
    } else {
        String::from("moment constraints met but stationarity tolerance not reached")
    }
}

/// Max-entropy solve from given free initial locations; radii start at the
/// nearest-neighbour rule.
pub fn solve_max_entropy_from(
    problem: &DmaProblem,
    free_init: &[f64],
    restart: usize,
) -> Result<SolutionReport> {
    problem.validate()?;
    let layout = Layout::new(problem);
    if free_init.len() != layout.free() * layout.dim {
        return Err(Error::DimensionMismatch {
            expected: layout.free() * layout.dim,
            found: free_init.len(),
        });
    }
    let opts = &problem.options;
    let expanded = layout.expand(free_init);
    let d0 = if layout.expanded == 1 {
        vec![opts.d_max.ok_or_else(|| {
            Error::Unbounded("a single component has no collision constraint; set d_max".into())
        })?]
    } else {
        nearest_neighbor_diameters(layout.dim, &expanded, opts.eps_slack)
    };
    if d0.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Degenerate("initial locations coincide".into()));
    }
    let mut z = free_init.to_vec();
    for i in 0..layout.free() {
        // Masters come first in the expanded order, so index 2i (or i) is theirs.
        let a = if layout.symmetric { 2 * i } else { i };
        let d = match opts.d_max {
            Some(cap) => d0[a].min(cap),
            None => d0[a],
        };
        z.push(ln(d));
    }
    let joint = JointProblem::new(problem, &layout, &expanded);
    let (z, trace) = maximize_constrained(&joint, &z, opts)?;
    let (locs, logd) = z.split_at(layout.free() * layout.dim);
    let joint_d: Vec<f64> = (0..layout.expanded)
        .map(|a| exp(logd[layout.owner(a).0]))
        .collect();
    let e = evaluate_locations(problem, &layout, locs, Some(joint_d))?;
    let converged =
        trace.converged && max_abs_entries(&e.residuals) <= opts.tol_eq && e.entropy.is_some();
    let message = if converged {
        e.note.clone()
    } else {
        Some(unconverged_message(&e, opts.tol_eq))
    };
    Ok(SolutionReport {
        strategy: Strategy::MaxEntropy,
        case: classify(problem),
        mixture: e.mixture,
        diameters: e.diameters,
        entropy: e.entropy,
        moment_residual_norm: e.norm,
        residuals: e.residuals,
        converged,
        trace,
        seed: opts.seed,
        restart,
        message,
    })
}

fn max_abs_entries(r: &[ResidualEntry]) -> f64 {
    r.iter().fold(0.0, |m, e| m.max(e.value.abs()))
}

// Higher entropy wins among converged runs; otherwise lower residual.
fn better_max_entropy(candidate: &SolutionReport, incumbent: &SolutionReport) -> bool {
    match (candidate.converged, incumbent.converged) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => {
            candidate.entropy.unwrap_or(f64::NEG_INFINITY)
                > incumbent.entropy.unwrap_or(f64::NEG_INFINITY)
        }
        (false, false) => candidate.moment_residual_norm < incumbent.moment_residual_norm,
    }
}

/// Maximum-entropy Dirac mixture for an underdetermined problem, best of
/// `options.restarts` random initializations.
pub fn solve_max_entropy(problem: &DmaProblem) -> Result<SolutionReport> {
    problem.validate()?;
    let case = classify(problem);
    if case != Case::Underdetermined {
        return Err(Error::InvalidInput(format!(
            "max-entropy solve needs an underdetermined problem, this one is {case:?}"
        )));
    }
    let layout = Layout::new(problem);
    let mut best: Option<SolutionReport> = None;
    for restart in 0..problem.options.restarts {
        let init = initial_locations(problem, &layout, restart)?;
        let report = solve_max_entropy_from(problem, &init, restart)?;
        if best.as_ref().is_none_or(|b| better_max_entropy(&report, b)) {
            best = Some(report);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn run_lm(
    problem: &DmaProblem,
    layout: &Layout,
    restart: usize,
    weighting: Option<&Weighting>,
) -> Result<(Vec<f64>, SolverTrace)> {
    let init = initial_locations(problem, layout, restart)?;
    let lm = LmProblem {
        moments: MomentMap::new(layout, &problem.target, weighting),
        vars: init.len(),
    };
    if lm.num_residuals() == 0 {
        return Err(Error::InvalidInput(
            "target table specifies no non-trivial moments".into(),
        ));
    }
    match lm_root(&lm, &init, &problem.options) {
        Ok(out) => Ok(out),
        // A flat start is a property of this draw, not of the problem.
        Err(Error::RankCollapse(_)) => {
            let trace = SolverTrace {
                outer_iterations: 0,
                inner_iterations: 0,
                objective: f64::INFINITY,
                max_eq_violation: f64::INFINITY,
                max_ineq_violation: 0.0,
                stationarity: f64::INFINITY,
                final_penalty: 0.0,
                termination: Termination::Stalled,
                converged: false,
            };
            Ok((init, trace))
        }
        Err(e) => Err(e),
    }
}

fn lm_report(
    problem: &DmaProblem,
    layout: &Layout,
    strategy: Strategy,
    x: &[f64],
    trace: SolverTrace,
    restart: usize,
    converged: bool,
) -> Result<SolutionReport> {
    let e = evaluate_locations(problem, layout, x, None)?;
    let message = if converged {
        e.note.clone()
    } else {
        Some(unconverged_message(&e, problem.options.tol_eq))
    };
    Ok(SolutionReport {
        strategy,
        case: classify(problem),
        mixture: e.mixture,
        diameters: e.diameters,
        entropy: e.entropy,
        moment_residual_norm: e.norm,
        residuals: e.residuals,
        converged,
        trace,
        seed: problem.options.seed,
        restart,
        message,
    })
}

// First restart whose LM run reaches a root; the lowest residual otherwise.
fn first_root(problem: &DmaProblem, strategy: Strategy) -> Result<SolutionReport> {
    problem.validate()?;
    let layout = Layout::new(problem);
    let mut best: Option<(Vec<f64>, SolverTrace, usize)> = None;
    for restart in 0..problem.options.restarts {
        let (x, trace) = run_lm(problem, &layout, restart, None)?;
        if trace.termination == Termination::Converged {
            return lm_report(problem, &layout, strategy, &x, trace, restart, true);
        }
        if best
            .as_ref()
            .is_none_or(|(_, t, _)| trace.objective < t.objective)
        {
            best = Some((x, trace, restart));
        }
    }
    let (x, trace, restart) = best.expect("restarts >= 1");
    let mut report = lm_report(problem, &layout, strategy, &x, trace, restart, false)?;
    report.message = Some(format!(
        "no root found across {} restarts (best residual {:e})",
        problem.options.restarts, report.moment_residual_norm
    ));
    Ok(report)
}

/// Unregularized baseline: Levenberg–Marquardt on the moment equations,
/// then max-entropy radii for the locations it found.
pub fn solve_lm_baseline(problem: &DmaProblem) -> Result<SolutionReport> {
    first_root(problem, Strategy::LmBaseline)
}

/// Root solve when the number of moments equals the number of parameters.
pub fn solve_fully_determined(problem: &DmaProblem) -> Result<SolutionReport> {
    let case = classify(problem);
    if case != Case::FullyDetermined {
        return Err(Error::InvalidInput(format!(
            "root solve needs a fully determined problem, this one is {case:?}"
        )));
    }
    first_root(problem, Strategy::RootSolve)
}

/// Least-squares fit of the (weighted) moment residual, best of all restarts.
pub fn solve_overdetermined(problem: &DmaProblem) -> Result<SolutionReport> {
    problem.validate()?;
    let case = classify(problem);
    if case != Case::Overdetermined {
        return Err(Error::InvalidInput(format!(
            "least squares needs an overdetermined problem, this one is {case:?}"
        )));
    }
    let layout = Layout::new(problem);
    let mut best: Option<(Vec<f64>, SolverTrace, usize)> = None;
    for restart in 0..problem.options.restarts {
        let (x, trace) = run_lm(problem, &layout, restart, Some(&problem.weighting))?;
        if best
            .as_ref()
            .is_none_or(|(_, t, _)| trace.objective < t.objective)
        {
            best = Some((x, trace, restart));
        }
    }
    let (x, trace, restart) = best.expect("restarts >= 1");
    let converged = trace.converged;
    let mut report = lm_report(
        problem,
        &layout,
        Strategy::LeastSquares,
        &x,
        trace,
        restart,
        converged,
    )?;
    if converged {
        report.message = report.message.or_else(|| {
            Some(format!(
                "least-squares fit, residual norm {:e}",
                report.moment_residual_norm
            ))
        });
    }
    Ok(report)
}

/// Dispatches on `method`; `Auto` picks the solver by [`classify`].
pub fn solve(problem: &DmaProblem, method: Method) -> Result<SolutionReport> {
    match method {
        Method::MaxEnt => solve_max_entropy(problem),
        Method::Lm => solve_lm_baseline(problem),
        Method::Auto => match classify(problem) {
            Case::Underdetermined => solve_max_entropy(problem),
            Case::FullyDetermined => solve_fully_determined(problem),
            Case::Overdetermined => solve_overdetermined(problem),
        },
    }
}
