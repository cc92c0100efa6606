//! Piecewise-constant companion density: component `i` is uniform with
//! height `h_i = w_i / V_N(d_i)` on the ball of radius `d_i` around `x̂_i`,
//! and the balls are disjoint.
//!
//! The entropy of this density is the regularizer of the whole crate.
//! Entropies are in nats.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::math::{exp, ln, sq_dist, sqrt};
use crate::moments::DiracMixture;
use crate::multiindex::check_dim;
use crate::solver::{
    maximize_constrained, ConstrainedProblem, SolverOptions, SolverTrace, SparseJacobian,
};
use crate::{Error, Result};

/// `log(π^{N/2} / Γ(N/2 + 1))`, the log-volume of the unit ball.
pub fn log_unit_ball_volume(dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    half * ln(core::f64::consts::PI) - libm::lgamma(half + 1.0)
}

/// Volume of the `dim`-ball of radius `d`.
pub fn sphere_volume(dim: usize, d: f64) -> f64 {
    exp(log_unit_ball_volume(dim)) * libm::pow(d, dim as f64)
}

/// A Dirac mixture together with one sphere radius per component.
#[derive(Clone, Debug, PartialEq)]
pub struct PwcDensity {
    mixture: DiracMixture,
    diameters: Vec<f64>,
}

impl PwcDensity {
    /// Validates positivity and disjointness with slack `eps_slack`.
    pub fn new(mixture: DiracMixture, diameters: Vec<f64>, eps_slack: f64) -> Result<Self> {
        check_dim(mixture.len(), diameters.len())?;
        let verdict = check_feasible(mixture.dim(), mixture.locations(), &diameters, eps_slack)?;
        if !verdict.feasible {
            return Err(Error::InvalidInput(format!(
                "spheres not disjoint or not positive: nonpositive {:?}, colliding {:?}",
                verdict.nonpositive, verdict.colliding
            )));
        }
        Ok(Self { mixture, diameters })
    }

    pub fn mixture(&self) -> &DiracMixture {
        &self.mixture
    }

    pub fn diameters(&self) -> &[f64] {
        &self.diameters
    }

    pub fn heights(&self) -> Vec<f64> {
        heights(self.mixture.dim(), self.mixture.weights(), &self.diameters)
    }

    pub fn entropy(&self) -> f64 {
        entropy(self.mixture.dim(), self.mixture.weights(), &self.diameters)
    }

    pub fn entropy_gradient_d(&self) -> Vec<f64> {
        entropy_gradient_d(self.mixture.dim(), self.mixture.weights(), &self.diameters)
    }

    /// Density value at `x`: the height of the sphere containing `x`, else 0.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let dim = self.mixture.dim();
        check_dim(dim, x.len())?;
        for (i, &d) in self.diameters.iter().enumerate() {
            if sq_dist(x, self.mixture.location(i)) <= d * d {
                return Ok(self.mixture.weights()[i] / sphere_volume(dim, d));
            }
        }
        Ok(0.0)
    }
}

/// `h_i = w_i / V_N(d_i)`.
pub fn heights(dim: usize, weights: &[f64], diameters: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .zip(diameters)
        .map(|(w, d)| w / sphere_volume(dim, *d))
        .collect()
}

/// `c_N − Σ w_i log(w_i / d_i^N)`.
pub fn entropy(dim: usize, weights: &[f64], diameters: &[f64]) -> f64 {
    let n = dim as f64;
    let sum: f64 = weights
        .iter()
        .zip(diameters)
        .map(|(w, d)| w * (ln(*w) - n * ln(*d)))
        .sum();
    log_unit_ball_volume(dim) - sum
}

/// `∂h/∂d_i = N w_i / d_i`.
pub fn entropy_gradient_d(dim: usize, weights: &[f64], diameters: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .zip(diameters)
        .map(|(w, d)| dim as f64 * w / d)
        .collect()
}

/// Outcome of [`check_feasible`]. Indices are zero-based; pairs have `i < j`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Feasibility {
    pub feasible: bool,
    pub nonpositive: Vec<usize>,
    pub colliding: Vec<(usize, usize)>,
}

/// Checks `d_i > 0` and `d_i + d_j ≤ (1 − ε)‖x̂_i − x̂_j‖` over all pairs `i < j`.
pub fn check_feasible(
    dim: usize,
    locations: &[f64],
    diameters: &[f64],
    eps_slack: f64,
) -> Result<Feasibility> {
    check_dim(diameters.len() * dim, locations.len())?;
    let l = diameters.len();
    let nonpositive: Vec<usize> = (0..l).filter(|&i| !(diameters[i] > 0.0)).collect();
    let mut colliding = Vec::new();
    for i in 0..l {
        for j in i + 1..l {
            let dist = sqrt(sq_dist(
                &locations[i * dim..(i + 1) * dim],
                &locations[j * dim..(j + 1) * dim],
            ));
            if !(diameters[i] + diameters[j] <= (1.0 - eps_slack) * dist) {
                colliding.push((i, j));
            }
        }
    }
    Ok(Feasibility {
        feasible: nonpositive.is_empty() && colliding.is_empty(),
        nonpositive,
        colliding,
    })
}

/// Scalar-only check using the sorted order: `d_i > 0` and only neighbouring
/// spheres, `L − 1` pair constraints in place of `L(L − 1)/2`.
pub fn check_feasible_sorted_1d(
    locations: &[f64],
    diameters: &[f64],
    eps_slack: f64,
) -> Result<Feasibility> {
    check_dim(diameters.len(), locations.len())?;
    let order = sorted_order(locations);
    let nonpositive: Vec<usize> = (0..diameters.len())
        .filter(|&i| !(diameters[i] > 0.0))
        .collect();
    let colliding: Vec<(usize, usize)> = order
        .windows(2)
        .filter(|w| {
            let (a, b) = (w[0], w[1]);
            !(diameters[a] + diameters[b] <= (1.0 - eps_slack) * (locations[b] - locations[a]))
        })
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
        .collect();
    Ok(Feasibility {
        feasible: nonpositive.is_empty() && colliding.is_empty(),
        nonpositive,
        colliding,
    })
}

pub(crate) fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Pairs that need a collision constraint: sorted neighbours for `dim == 1`, all pairs otherwise.
pub(crate) fn collision_pairs(dim: usize, locations: &[f64]) -> Vec<(usize, usize)> {
    let l = locations.len() / dim;
    if dim == 1 {
        sorted_order(locations)
            .windows(2)
            .map(|w| (w[0], w[1]))
            .collect()
    } else {
        (0..l)
            .flat_map(|i| (i + 1..l).map(move |j| (i, j)))
            .collect()
    }
}

/// `d_i = (1 − ε) · ½ · (distance to the nearest neighbour)`; always feasible.
pub fn nearest_neighbor_diameters(dim: usize, locations: &[f64], eps_slack: f64) -> Vec<f64> {
    let l = locations.len() / dim;
    (0..l)
        .map(|i| {
            let nearest = (0..l)
                .filter(|&j| j != i)
                .map(|j| {
                    sq_dist(
                        &locations[i * dim..(i + 1) * dim],
                        &locations[j * dim..(j + 1) * dim],
                    )
                })
                .fold(f64::INFINITY, f64::min);
            (1.0 - eps_slack) * 0.5 * sqrt(nearest)
        })
        .collect()
}

/// Uniformly shrinks `diameters` until every pair constraint in `pairs`
/// holds with slack, then clips to `d_max`.
pub(crate) fn enforce_disjoint(
    dim: usize,
    locations: &[f64],
    diameters: &mut [f64],
    eps_slack: f64,
    d_max: Option<f64>,
) {
    if let Some(cap) = d_max {
        for d in diameters.iter_mut() {
            *d = d.min(cap);
        }
    }
    let l = diameters.len();
    // A few passes absorb the rounding of the product `t · d`.
    for _ in 0..4 {
        let mut factor = 1.0f64;
        for i in 0..l {
            for j in i + 1..l {
                let cap = (1.0 - eps_slack)
                    * sqrt(sq_dist(
                        &locations[i * dim..(i + 1) * dim],
                        &locations[j * dim..(j + 1) * dim],
                    ));
                let sum = diameters[i] + diameters[j];
                if sum > cap {
                    factor = factor.min(cap / sum);
                }
            }
        }
        if factor >= 1.0 {
            return;
        }
        for d in diameters.iter_mut() {
            *d *= factor * (1.0 - 4.0 * f64::EPSILON);
        }
    }
}

// Radii for fixed locations, in log parametrization s_i = log d_i.
struct RadiusProblem<'a> {
    dim: usize,
    weights: &'a [f64],
    // (i, j, (1 − ε)‖x̂_i − x̂_j‖)
    pairs: Vec<(usize, usize, f64)>,
    log_d_max: Option<f64>,
}

impl ConstrainedProblem for RadiusProblem<'_> {
    fn num_vars(&self) -> usize {
        self.weights.len()
    }
    fn num_eq(&self) -> usize {
        0
    }
    fn num_ineq(&self) -> usize {
        self.pairs.len()
            + if self.log_d_max.is_some() {
                self.weights.len()
            } else {
                0
            }
    }
    fn objective(&self, s: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.dim as f64;
        let mut value = log_unit_ball_volume(self.dim);
        for (i, &w) in self.weights.iter().enumerate() {
            value -= w * (ln(w) - n * s[i]);
            grad[i] = n * w;
        }
        value
    }
    fn equalities(&self, _: &[f64], _: &mut [f64], _: &mut SparseJacobian) {}
    fn inequalities(&self, s: &[f64], values: &mut [f64], jac: &mut SparseJacobian) {
        // Normalized by the pair's capacity so every row is dimensionless.
        for (row, &(i, j, cap)) in self.pairs.iter().enumerate() {
            let (di, dj) = (exp(s[i]), exp(s[j]));
            values[row] = (di + dj) / cap - 1.0;
            jac.push(row, i, di / cap);
            jac.push(row, j, dj / cap);
        }
        if let Some(log_cap) = self.log_d_max {
            let base = self.pairs.len();
            for i in 0..self.weights.len() {
                values[base + i] = s[i] - log_cap;
                jac.push(base + i, i, 1.0);
            }
        }
    }
}

fn radius_problem<'a>(dm: &'a DiracMixture, opts: &SolverOptions) -> RadiusProblem<'a> {
    let pairs = collision_pairs(dm.dim(), dm.locations())
        .into_iter()
        .map(|(i, j)| {
            let dist = sqrt(sq_dist(dm.location(i), dm.location(j)));
            (i, j, (1.0 - opts.eps_slack) * dist)
        })
        .collect();
    RadiusProblem {
        dim: dm.dim(),
        weights: dm.weights(),
        pairs,
        log_d_max: opts.d_max.map(ln),
    }
}

/// Constraint rows of the fixed-location radius problem at log-radii `s`:
/// `(d_i + d_j)/((1 − ε)‖x_i − x_j‖) − 1 ≤ 0` per pair, then the `d_max` rows.
pub fn radius_constraints(
    dm: &DiracMixture,
    log_d: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if log_d.len() != dm.len() {
        return Err(Error::DimensionMismatch {
            expected: dm.len(),
            found: log_d.len(),
        });
    }
    let problem = radius_problem(dm, opts);
    let m = problem.num_ineq();
    let mut values = vec![0.0; m];
    let mut jac = SparseJacobian::new(m, dm.len());
    problem.inequalities(log_d, &mut values, &mut jac);
    Ok((values, jac.to_dense()))
}

/// Maximum-entropy radii for fixed locations, with the solver trace.
pub fn max_entropy_diameters_traced(
    dm: &DiracMixture,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolverTrace)> {
    opts.validate()?;
    let dim = dm.dim();
    let l = dm.len();
    if l > 1 && dm.min_pairwise_distance() == 0.0 {
        return Err(Error::Degenerate(
            "coincident locations admit no disjoint spheres".into(),
        ));
    }
    if l == 1 && opts.d_max.is_none() {
        return Err(Error::Unbounded(
            "a single component has no collision constraint; set d_max".into(),
        ));
    }
    let locations = dm.locations();
    let mut init = if l == 1 {
        vec![opts.d_max.unwrap_or(1.0)]
    } else {
        nearest_neighbor_diameters(dim, locations, opts.eps_slack)
    };
    if let Some(cap) = opts.d_max {
        for d in init.iter_mut() {
            *d = d.min(cap);
        }
    }
    let s0: Vec<f64> = init.iter().map(|d| ln(*d)).collect();
    let problem = radius_problem(dm, opts);
    let (s, trace) = maximize_constrained(&problem, &s0, opts)?;
    let mut d: Vec<f64> = s.iter().map(|v| exp(*v)).collect();
    enforce_disjoint(dim, locations, &mut d, opts.eps_slack, opts.d_max);
    Ok((d, trace))
}

/// Maximum-entropy radii for fixed locations.
///
/// Scalar mixtures use the sorted-neighbour constraint set. The result is
/// always feasible under `opts.eps_slack`.
pub fn max_entropy_diameters(dm: &DiracMixture, opts: &SolverOptions) -> Result<Vec<f64>> {
    max_entropy_diameters_traced(dm, opts).map(|(d, _)| d)
}
