use dmix_core::dma::{self, DmaProblem, Method};
use dmix_core::eval::preset;
use dmix_core::moments::{dirac_moments, MomentTable};
use dmix_core::multiindex::MultiIndex;
use dmix_core::pwc::check_feasible;
use dmix_core::solver::{
    lm_root, maximize_constrained_observed, ConstrainedProblem, OuterStep, ResidualProblem,
    SolverOptions, SparseJacobian,
};
use nalgebra::DMatrix;

fn idx(k: &[u32]) -> MultiIndex {
    MultiIndex::new(k.to_vec()).unwrap()
}

// The joint formulation seen only through its public dense evaluation.
struct Joint<'a>(&'a DmaProblem);

impl Joint<'_> {
    fn push(dense: &DMatrix<f64>, jac: &mut SparseJacobian) {
        for r in 0..dense.nrows() {
            for c in 0..dense.ncols() {
                jac.push(r, c, dense[(r, c)]);
            }
        }
    }
}

impl ConstrainedProblem for Joint<'_> {
    fn num_vars(&self) -> usize {
        dma::joint_dimension(self.0)
    }
    fn num_eq(&self) -> usize {
        self.0.target.iter().filter(|(k, _)| !k.is_zero()).count()
    }
    fn num_ineq(&self) -> usize {
        // The count does not depend on the point.
        let z: Vec<f64> = (0..self.num_vars()).map(|i| i as f64).collect();
        dma::evaluate_joint(self.0, &z).unwrap().inequalities.len()
    }
    fn objective(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let e = dma::evaluate_joint(self.0, z).unwrap();
        grad.copy_from_slice(&e.objective_gradient);
        e.objective
    }
    fn equalities(&self, z: &[f64], values: &mut [f64], jac: &mut SparseJacobian) {
        let e = dma::evaluate_joint(self.0, z).unwrap();
        values.copy_from_slice(&e.equalities);
        Self::push(&e.equality_jacobian, jac);
    }
    fn inequalities(&self, z: &[f64], values: &mut [f64], jac: &mut SparseJacobian) {
        let e = dma::evaluate_joint(self.0, z).unwrap();
        values.copy_from_slice(&e.inequalities);
        Self::push(&e.inequality_jacobian, jac);
    }
}

#[test]
fn infeasibility_shrinks_unless_the_penalty_grows() {
    for (name, l) in [("gauss1d", 6), ("gm1d_m4", 10)] {
        let p = preset(name).unwrap().problem(l).unwrap();
        for seed in 0..3 {
            let x0 = dma::init_random(seed, 0, l, 1, false, None);
            let mut sorted = x0.clone();
            sorted.sort_by(f64::total_cmp);
            let gap = sorted
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            let mut z = x0;
            z.extend(std::iter::repeat_n((0.4 * gap).ln(), l));
            let mut steps: Vec<OuterStep> = Vec::new();
            let (_, trace) =
                maximize_constrained_observed(&Joint(&p), &z, &p.options, |s| steps.push(s))
                    .unwrap();
            assert!(trace.converged, "{name} seed {seed}: {trace:?}");
            assert!(
                trace.max_ineq_violation <= p.options.tol_eq
                    && trace.max_eq_violation <= p.options.tol_eq
            );
            for w in steps.windows(2) {
                assert!(
                    w[1].infeasibility <= w[0].infeasibility || w[1].penalty_increased,
                    "{name} seed {seed}: {:?}",
                    w
                );
            }
        }
    }
}

#[test]
fn converged_max_entropy_meets_every_target() {
    for (name, l) in [("gauss1d", 10), ("gm1d_m4", 10), ("gm1d_m6", 15)] {
        let p = preset(name).unwrap().problem(l).unwrap();
        let r = dma::solve_max_entropy(&p).unwrap();
        assert!(r.converged, "{name}: {:?}", r.message);
        for e in &r.residuals {
            assert!(
                e.value.abs() <= p.options.tol_eq,
                "{name} {:?}: {}",
                e.index,
                e.value
            );
        }
        assert!(
            check_feasible(1, r.mixture.locations(), &r.diameters, p.options.eps_slack)
                .unwrap()
                .feasible
        );
    }
}

#[test]
fn symmetric_scalar_mean_is_exact() {
    let target =
        MomentTable::from_entries(1, [(idx(&[1]), 0.0), (idx(&[2]), 1.0), (idx(&[3]), 0.0)])
            .unwrap();
    let p = DmaProblem::new(8, target).symmetric_about(vec![0.0]);
    let r = dma::solve_max_entropy(&p).unwrap();
    assert!(r.converged, "{:?}", r.message);
    let t = dirac_moments(&r.mixture, 5);
    assert_eq!(t.get(&idx(&[1])), Some(0.0));
    assert_eq!(t.get(&idx(&[3])), Some(0.0));
    assert_eq!(t.get(&idx(&[5])), Some(0.0));
}

#[test]
fn entropy_dominance_on_the_mixture_targets() {
    let pr = preset("gm1d_m4").unwrap();
    let mut min_me = f64::INFINITY;
    let mut max_lm = f64::NEG_INFINITY;
    for seed in 0..10 {
        let mut p = pr.problem(10).unwrap();
        p.options.seed = seed;
        let me = dma::solve_max_entropy(&p).unwrap();
        assert!(me.converged);
        min_me = min_me.min(me.entropy.unwrap());
        let lm = dma::solve_lm_baseline(&p).unwrap();
        if let Some(h) = lm.entropy {
            max_lm = max_lm.max(h);
        }
    }
    assert!(min_me >= max_lm, "{min_me} < {max_lm}");
}

#[test]
fn solves_are_reproducible() {
    let p = preset("gauss2d_sym").unwrap().problem(16).unwrap();
    assert_eq!(
        dma::solve(&p, Method::Auto).unwrap(),
        dma::solve(&p, Method::Auto).unwrap()
    );
    let p = preset("gauss1d").unwrap().problem(6).unwrap();
    assert_eq!(
        dma::solve_lm_baseline(&p).unwrap(),
        dma::solve_lm_baseline(&p).unwrap()
    );
}

// Six unknowns, three standard-normal moment equations.
struct Underdetermined;

impl ResidualProblem for Underdetermined {
    fn num_vars(&self) -> usize {
        6
    }
    fn num_residuals(&self) -> usize {
        3
    }
    fn residuals(&self, x: &[f64], r: &mut [f64], jac: Option<&mut DMatrix<f64>>) {
        let w = 1.0 / 6.0;
        r[0] = x.iter().map(|v| w * v).sum::<f64>();
        r[1] = x.iter().map(|v| w * v * v).sum::<f64>() - 1.0;
        r[2] = x.iter().map(|v| w * v * v * v).sum::<f64>();
        if let Some(j) = jac {
            for (c, v) in x.iter().enumerate() {
                j[(0, c)] = w;
                j[(1, c)] = 2.0 * w * v;
                j[(2, c)] = 3.0 * w * v * v;
            }
        }
    }
}

#[test]
fn underdetermined_lm_roots_depend_on_the_start() {
    let opts = SolverOptions::default();
    let mut roots: Vec<Vec<f64>> = Vec::new();
    for seed in 0..5 {
        let x0 = dma::init_random(seed, 0, 6, 1, false, None);
        let (mut x, trace) = lm_root(&Underdetermined, &x0, &opts).unwrap();
        assert!(
            trace.converged && trace.max_eq_violation <= 1e-6,
            "{trace:?}"
        );
        x.sort_by(f64::total_cmp);
        roots.push(x);
    }
    let differs = |a: &[f64], b: &[f64]| a.iter().zip(b).any(|(u, v)| (u - v).abs() > 1e-3);
    assert!(roots.iter().skip(1).any(|r| differs(r, &roots[0])));
}

#[test]
fn zero_weight_index_is_ignored() {
    use dmix_core::moments::Weighting;
    // A single point cannot match e2 = 5 together with e1 = 1; dropping e2 leaves x = 1.
    let target = MomentTable::from_entries(1, [(idx(&[1]), 1.0), (idx(&[2]), 5.0)]).unwrap();
    let mut p = DmaProblem::new(1, target).with_options(SolverOptions {
        d_max: Some(1.0),
        ..Default::default()
    });
    p.weighting = Weighting::PerIndex(vec![(idx(&[2]), 0.0)]);
    let r = dma::solve(&p, Method::Auto).unwrap();
    assert!(
        (r.mixture.locations()[0] - 1.0).abs() < 1e-6,
        "{:?}",
        r.mixture
    );
}
