//! Empirical CDFs, a Cramér–von Mises distance to reference distributions,
//! and the experiment presets.
//!
//! References live here only; the solvers never see them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dma::DmaProblem;
use crate::moments::{
    mixture_raw_moments, DiracMixture, MomentTable, ScalarGaussian, ScalarGaussianMixture,
};
use crate::multiindex::MultiIndex;
use crate::{Error, Result};

/// Quadrature nodes used by [`cvm_distance_1d`].
pub const CVM_NODES: usize = 10_000;
/// Samples in a reference CDF plot grid.
pub const REFERENCE_GRID_POINTS: usize = 1000;
/// Margin added on both sides of the locations for the plot grid.
pub const REFERENCE_GRID_MARGIN: f64 = 3.0;

fn require_scalar(dm: &DiracMixture) -> Result<()> {
    if dm.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: dm.dim(),
        });
    }
    Ok(())
}

/// Sorted `(location, cumulative weight)` steps of a scalar mixture.
pub fn ecdf_1d(dm: &DiracMixture) -> Result<Vec<(f64, f64)>> {
    require_scalar(dm)?;
    let x = dm.locations();
    let w = dm.weights();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut acc = 0.0;
    Ok(order
        .into_iter()
        .map(|i| {
            acc += w[i];
            (x[i], acc)
        })
        .collect())
}

fn step_value(steps: &[(f64, f64)], q: f64) -> f64 {
    let k = steps.partition_point(|&(x, _)| x <= q);
    if k == 0 {
        0.0
    } else {
        steps[k - 1].1
    }
}

// Smallest x with F(x) ≥ u, to within bisection resolution.
fn quantile(cdf: &impl Fn(f64) -> f64, u: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while cdf(lo) >= u && lo > -1e300 {
        lo *= 2.0;
    }
    while cdf(hi) < u && hi < 1e300 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `∫ (F_dm − F_ref)² dF_ref`, by the midpoint rule in probability space on
/// [`CVM_NODES`] nodes `u_k = (k − ½)/n` placed at the reference quantiles.
pub fn cvm_distance_1d(dm: &DiracMixture, cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let steps = ecdf_1d(dm)?;
    let n = CVM_NODES;
    let mut sum = 0.0;
    for k in 0..n {
        let u = (k as f64 + 0.5) / n as f64;
        let diff = step_value(&steps, quantile(&cdf, u)) - u;
        sum += diff * diff;
    }
    Ok(sum / n as f64)
}

/// `Φ((x − m)/σ)`.
pub fn gaussian_cdf(g: &ScalarGaussian, x: f64) -> f64 {
    0.5 * libm::erfc(-(x - g.mean) / (g.std * core::f64::consts::SQRT_2))
}

pub fn reference_cdf_gaussian(mean: f64, std: f64) -> Result<impl Fn(f64) -> f64> {
    let g = ScalarGaussian::new(mean, std)?;
    Ok(move |x| gaussian_cdf(&g, x))
}

pub fn reference_cdf_gm(gm: &ScalarGaussianMixture) -> impl Fn(f64) -> f64 + '_ {
    move |x| {
        gm.components()
            .iter()
            .map(|(w, g)| w * gaussian_cdf(g, x))
            .sum()
    }
}

/// Density whose moments define a preset; used for evaluation only.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum Reference {
    Gaussian {
        mean: f64,
        std: f64,
    },
    GaussianMixture {
        components: Vec<(f64, ScalarGaussian)>,
    },
    /// A planar target without a closed-form reference distribution.
    None,
}

impl Reference {
    /// The reference CDF, when the reference is a scalar distribution.
    pub fn cdf(&self, x: f64) -> Option<f64> {
        match self {
            Reference::Gaussian { mean, std } => Some(gaussian_cdf(
                &ScalarGaussian {
                    mean: *mean,
                    std: *std,
                },
                x,
            )),
            Reference::GaussianMixture { components } => {
                Some(components.iter().map(|(w, g)| w * gaussian_cdf(g, x)).sum())
            }
            Reference::None => None,
        }
    }

    /// CvM distance of `dm` to this reference.
    pub fn cvm_distance(&self, dm: &DiracMixture) -> Result<f64> {
        if matches!(self, Reference::None) {
            return Err(Error::InvalidInput("reference has no scalar CDF".into()));
        }
        cvm_distance_1d(dm, |x| self.cdf(x).unwrap_or(f64::NAN))
    }
}

/// `REFERENCE_GRID_POINTS` equispaced abscissae over `[min − 3, max + 3]`.
pub fn reference_grid(dm: &DiracMixture) -> Result<Vec<f64>> {
    require_scalar(dm)?;
    let lo = dm.locations().iter().copied().fold(f64::INFINITY, f64::min) - REFERENCE_GRID_MARGIN;
    let hi = dm
        .locations()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        + REFERENCE_GRID_MARGIN;
    let n = REFERENCE_GRID_POINTS;
    Ok((0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect())
}

/// A reproducible experiment configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPreset {
    pub name: &'static str,
    /// Component counts used in the experiment, paired with moment orders.
    pub runs: Vec<(usize, u32)>,
    pub symmetric: bool,
    pub mean: Option<Vec<f64>>,
    pub dim: usize,
    reference: Reference,
    tables: Vec<(u32, MomentTable)>,
}

pub const PRESET_NAMES: [&str; 4] = ["gauss1d", "gm1d_m4", "gm1d_m6", "gauss2d_sym"];

impl ExperimentPreset {
    /// Target table for order `m` (the preset's own order when `None`).
    pub fn target(&self, order: Option<u32>) -> Result<&MomentTable> {
        let order = order.unwrap_or(self.tables[0].0);
        self.tables
            .iter()
            .find(|(m, _)| *m == order)
            .map(|(_, t)| t)
            .ok_or_else(|| {
                Error::InvalidInput(format!("preset {} has no order-{order} table", self.name))
            })
    }

    /// The problem for `components` Dirac components, with the matching
    /// moment order from [`Self::runs`] (the preset's first order otherwise).
    pub fn problem(&self, components: usize) -> Result<DmaProblem> {
        let order = self
            .runs
            .iter()
            .find(|(l, _)| *l == components)
            .map(|(_, m)| *m);
        let mut p = DmaProblem::new(components, self.target(order)?.clone());
        if self.symmetric {
            p = p.symmetric_about(self.mean.clone().unwrap_or_else(|| vec![0.0; self.dim]));
        }
        Ok(p)
    }

    pub fn component_counts(&self) -> Vec<usize> {
        self.runs.iter().map(|(l, _)| *l).collect()
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }
}

fn scalar_table(gm: &ScalarGaussianMixture, order: u32, with_zero: bool) -> Result<MomentTable> {
    let raw = mixture_raw_moments(gm, order);
    let start = if with_zero { 0 } else { 1 };
    MomentTable::from_entries(
        1,
        (start..=order).map(|k| {
            (
                MultiIndex::new(vec![k]).expect("non-empty"),
                raw[k as usize],
            )
        }),
    )
}

fn two_component_mixture() -> Result<ScalarGaussianMixture> {
    ScalarGaussianMixture::new(vec![
        (0.4, ScalarGaussian::new(-1.5, 0.7)?),
        (0.6, ScalarGaussian::new(1.5, 0.7)?),
    ])
}

/// Looks up one of [`PRESET_NAMES`].
pub fn preset(name: &str) -> Result<ExperimentPreset> {
    match name {
        "gauss1d" => {
            let g = ScalarGaussianMixture::new(vec![(1.0, ScalarGaussian::standard())])?;
            Ok(ExperimentPreset {
                name: "gauss1d",
                runs: vec![(6, 2), (10, 2), (15, 2)],
                symmetric: false,
                mean: None,
                dim: 1,
                reference: Reference::Gaussian {
                    mean: 0.0,
                    std: 1.0,
                },
                tables: vec![(2, scalar_table(&g, 2, false)?)],
            })
        }
        "gm1d_m4" | "gm1d_m6" => {
            let gm = two_component_mixture()?;
            let (name, runs, order) = if name == "gm1d_m4" {
                ("gm1d_m4", vec![(10, 4)], 4)
            } else {
                ("gm1d_m6", vec![(15, 6), (25, 6)], 6)
            };
            Ok(ExperimentPreset {
                name,
                runs,
                symmetric: false,
                mean: None,
                dim: 1,
                reference: Reference::GaussianMixture {
                    components: gm.components().to_vec(),
                },
                tables: vec![(order, scalar_table(&gm, order, true)?)],
            })
        }
        "gauss2d_sym" => {
            let entries = [
                ([0, 0], 1.0),
                ([0, 1], 0.0),
                ([1, 0], 0.0),
                ([1, 1], 0.0),
                ([2, 0], 1.0),
                ([0, 2], 3.0),
            ];
            let table = MomentTable::from_entries(
                2,
                entries
                    .iter()
                    .map(|(k, v)| (MultiIndex::new(k.to_vec()).expect("non-empty"), *v)),
            )?;
            Ok(ExperimentPreset {
                name: "gauss2d_sym",
                runs: vec![(16, 2), (20, 2), (30, 2), (40, 2)],
                symmetric: true,
                mean: Some(vec![0.0, 0.0]),
                dim: 2,
                reference: Reference::None,
                tables: vec![(2, table)],
            })
        }
        other => Err(Error::UnknownPreset(format!(
            "{other} (known: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: &[f64]) -> DiracMixture {
        DiracMixture::equally_weighted(1, x.to_vec()).unwrap()
    }

    #[test]
    fn ecdf_steps() {
        assert_eq!(
            ecdf_1d(&scalar(&[1.0, -1.0])).unwrap(),
            vec![(-1.0, 0.5), (1.0, 1.0)]
        );
        assert_eq!(ecdf_1d(&scalar(&[0.3])).unwrap(), vec![(0.3, 1.0)]);
        let dm = DiracMixture::new(1, vec![0.0, 1.0], vec![0.2, 0.8]).unwrap();
        assert_eq!(ecdf_1d(&dm).unwrap(), vec![(0.0, 0.2), (1.0, 1.0)]);
        let planar = DiracMixture::equally_weighted(2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(ecdf_1d(&planar).is_err());
    }

    #[test]
    fn point_mass_at_median_gives_one_twelfth() {
        let cdf = reference_cdf_gaussian(0.0, 1.0).unwrap();
        let d = cvm_distance_1d(&scalar(&[0.0]), &cdf).unwrap();
        // The midpoint rule on (u − ½)² is exact up to 1/(12 n²).
        assert!((d - 1.0 / 12.0).abs() < 1e-7, "{d}");
    }

    #[test]
    fn quantile_mixtures_approach_the_reference() {
        let cdf = reference_cdf_gaussian(0.5, 2.0).unwrap();
        let mut last = f64::INFINITY;
        for l in [2, 4, 8, 16, 32] {
            let x: Vec<f64> = (0..l)
                .map(|i| quantile(&cdf, (i as f64 + 0.5) / l as f64))
                .collect();
            let d = cvm_distance_1d(&scalar(&x), &cdf).unwrap();
            // A quantile mixture sits at 1/(12 L²).
            assert!(
                (d - 1.0 / (12.0 * (l * l) as f64)).abs() < 1e-6,
                "L={l}: {d}"
            );
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn cdf_limits_and_centre() {
        let cdf = reference_cdf_gaussian(1.3, 0.4).unwrap();
        assert_eq!(cdf(1.3), 0.5);
        assert!(cdf(-1e6) < 1e-12 && (1.0 - cdf(1e6)).abs() < 1e-12);
        assert!(reference_cdf_gaussian(0.0, 0.0).is_err());
    }

    #[test]
    fn grid_spans_locations_with_margin() {
        let g = reference_grid(&scalar(&[-1.0, 2.0])).unwrap();
        assert_eq!(g.len(), 1000);
        assert_eq!(g[0], -4.0);
        assert!((g[999] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn presets() {
        let g = preset("gauss1d").unwrap();
        let t = g.target(None).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get(&MultiIndex::new(vec![1]).unwrap()), Some(0.0));
        assert_eq!(t.get(&MultiIndex::new(vec![2]).unwrap()), Some(1.0));
        assert_eq!(g.component_counts(), vec![6, 10, 15]);
        assert_eq!(preset("gm1d_m4").unwrap().target(None).unwrap().len(), 5);
        assert_eq!(preset("gm1d_m6").unwrap().target(None).unwrap().len(), 7);
        let p2 = preset("gauss2d_sym").unwrap();
        assert_eq!(p2.target(None).unwrap().len(), 6);
        assert!(p2.problem(16).unwrap().symmetric);
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }
}
