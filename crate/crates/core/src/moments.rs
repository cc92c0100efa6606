//! Power moments of Dirac mixtures and closed-form moments of scalar
//! Gaussians and Gaussian mixtures.
//!
//! Moments of a Dirac mixture are always evaluated on the point masses
//! themselves. The piecewise-constant companion density in [`crate::pwc`]
//! has no moment API.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::math::{abs, binomial_row, odd_double_factorial, powu, sq_dist, sqrt};
use crate::multiindex::{check_dim, enumerate_indices, monomial_unchecked, MultiIndex};
use crate::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Sparse table of moments `e_κ` with `|κ| ≤ order`.
///
/// Unspecified indices are absent, never stored as zero. Iteration follows
/// the graded lexicographic order of [`MultiIndex`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(
        into = "serde_repr::MomentTableRepr",
        try_from = "serde_repr::MomentTableRepr"
    )
)]
pub struct MomentTable {
    dim: usize,
    order: u32,
    entries: BTreeMap<MultiIndex, f64>,
}

impl MomentTable {
    pub fn new(dim: usize, order: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "moment table dimension must be at least 1".into(),
            ));
        }
        Ok(Self {
            dim,
            order,
            entries: BTreeMap::new(),
        })
    }

    /// Builds a table from `(index, value)` pairs; the order is the largest `|κ|` seen.
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let entries: Vec<_> = entries.into_iter().collect();
        let order = entries.iter().map(|(k, _)| k.order()).max().unwrap_or(0);
        let mut table = Self::new(dim, order)?;
        for (k, v) in entries {
            table.insert(k, v)?;
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: &MultiIndex) -> Option<f64> {
        self.entries.get(index).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn indices(&self) -> impl Iterator<Item = &MultiIndex> + '_ {
        self.entries.keys()
    }

    /// Inserts `e_κ = value`, replacing any previous entry.
    pub fn insert(&mut self, index: MultiIndex, value: f64) -> Result<()> {
        check_dim(self.dim, index.dim())?;
        if index.order() > self.order {
            return Err(Error::InvalidInput(format!(
                "index {:?} exceeds table order {}",
                index.exponents(),
                self.order
            )));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("moment {:?}", index.exponents())));
        }
        if index.is_zero() && abs(value - 1.0) > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "zero-order moment must equal 1, got {value}"
            )));
        }
        self.entries.insert(index, value);
        Ok(())
    }
}

/// `L` point masses in `R^N` with positive weights summing to one.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(
        into = "serde_repr::DiracMixtureRepr",
        try_from = "serde_repr::DiracMixtureRepr"
    )
)]
pub struct DiracMixture {
    dim: usize,
    // Row-major, one row per component.
    locations: Vec<f64>,
    weights: Vec<f64>,
}

impl DiracMixture {
    /// Validates positivity, normalization, and pairwise distinct locations.
    pub fn new(dim: usize, locations: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let dm = Self::new_unchecked_distinct(dim, locations, weights)?;
        if let Some((i, j)) = dm.coincident_pair() {
            return Err(Error::Degenerate(format!(
                "components {i} and {j} coincide"
            )));
        }
        Ok(dm)
    }

    pub fn equally_weighted(dim: usize, locations: Vec<f64>) -> Result<Self> {
        if dim == 0 || locations.len() % dim != 0 || locations.is_empty() {
            return Err(Error::InvalidInput(
                "location buffer must hold L >= 1 points".into(),
            ));
        }
        let l = locations.len() / dim;
        Self::new(dim, locations, vec![1.0 / l as f64; l])
    }

    /// Like [`DiracMixture::new`] but admits coincident locations. Used for solver
    /// iterates that are reported even when they failed to separate.
    pub(crate) fn new_unchecked_distinct(
        dim: usize,
        locations: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if weights.is_empty() {
            return Err(Error::InvalidInput(
                "mixture needs at least one component".into(),
            ));
        }
        check_dim(weights.len() * dim, locations.len())?;
        if locations.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixture location".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput(
                "weights must be strictly positive".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if abs(total - 1.0) > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            dim,
            locations,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Flattened locations, the parameter vector `η`.
    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn location(&self, i: usize) -> &[f64] {
        &self.locations[i * self.dim..(i + 1) * self.dim]
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min(sq_dist(self.location(i), self.location(j)));
            }
        }
        sqrt(best)
    }

    fn coincident_pair(&self) -> Option<(usize, usize)> {
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if sq_dist(self.location(i), self.location(j)) == 0.0 {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

/// Weighted power sums `Σ_i w_i x_i^κ` for each index, straight from a
/// location buffer. Components are accumulated in storage order.
pub(crate) fn power_sums(
    dim: usize,
    locations: &[f64],
    weights: &[f64],
    index: &MultiIndex,
) -> f64 {
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w * monomial_unchecked(&locations[i * dim..(i + 1) * dim], index.exponents());
    }
    acc
}

/// Writes `∂e_κ/∂x_{i,k}` into `out[i*dim + k]`.
pub(crate) fn power_sum_gradient(
    dim: usize,
    locations: &[f64],
    weights: &[f64],
    index: &MultiIndex,
    out: &mut [f64],
) {
    let exps = index.exponents();
    for (i, &w) in weights.iter().enumerate() {
        let x = &locations[i * dim..(i + 1) * dim];
        for k in 0..dim {
            let ek = exps[k];
            out[i * dim + k] = if ek == 0 {
                0.0
            } else {
                let mut prod = w * ek as f64 * powu(x[k], ek - 1);
                for (j, (&xj, &ej)) in x.iter().zip(exps).enumerate() {
                    if j != k && ej != 0 {
                        prod *= powu(xj, ej);
                    }
                }
                prod
            };
        }
    }
}

/// All moments of `dm` up to `max_order`. The zero-index entry is exactly 1.
pub fn dirac_moments(dm: &DiracMixture, max_order: u32) -> MomentTable {
    let mut entries = BTreeMap::new();
    for index in enumerate_indices(dm.dim, max_order) {
        let value = if index.is_zero() {
            1.0
        } else {
            power_sums(dm.dim, &dm.locations, &dm.weights, &index)
        };
        entries.insert(index, value);
    }
    MomentTable {
        dim: dm.dim,
        order: max_order,
        entries,
    }
}

/// Analytic `∂e_κ/∂x̂` as an `N × L` matrix (column `i` is component `i`).
pub fn dirac_moment_gradient(dm: &DiracMixture, index: &MultiIndex) -> Result<DMatrix<f64>> {
    check_dim(dm.dim, index.dim())?;
    let mut flat = vec![0.0; dm.locations.len()];
    power_sum_gradient(dm.dim, &dm.locations, &dm.weights, index, &mut flat);
    // Flat layout is column-major N × L already.
    Ok(DMatrix::from_vec(dm.dim, dm.len(), flat))
}

/// Scalar normal density parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalarGaussian {
    pub mean: f64,
    pub std: f64,
}

impl ScalarGaussian {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0) || !std.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidInput(format!(
                "invalid gaussian (mean {mean}, std {std})"
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn standard() -> Self {
        Self {
            mean: 0.0,
            std: 1.0,
        }
    }
}

/// Finite mixture of scalar Gaussians with non-negative weights summing to one.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalarGaussianMixture {
    components: Vec<(f64, ScalarGaussian)>,
}

impl ScalarGaussianMixture {
    pub fn new(components: Vec<(f64, ScalarGaussian)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput(
                "mixture needs at least one component".into(),
            ));
        }
        if components.iter().any(|(w, _)| !(*w >= 0.0)) {
            return Err(Error::InvalidInput(
                "mixture weights must be non-negative".into(),
            ));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if abs(total - 1.0) > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "mixture weights sum to {total}"
            )));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, ScalarGaussian)] {
        &self.components
    }
}

/// `E{(x-m)^i}` of a normal with standard deviation `std`.
pub fn gaussian_central_moment(i: u32, std: f64) -> f64 {
    if i % 2 == 1 {
        0.0
    } else {
        odd_double_factorial(i) * powu(std, i)
    }
}

/// `E{x^i}` via the binomial expansion around the mean.
pub fn gaussian_raw_moment(i: u32, g: &ScalarGaussian) -> f64 {
    let binom = binomial_row(i as usize);
    (0..=i)
        .map(|k| binom[k as usize] * gaussian_central_moment(i - k, g.std) * powu(g.mean, k))
        .sum()
}

/// Raw moments `E_0 … E_M` of a scalar Gaussian mixture.
pub fn mixture_raw_moments(gm: &ScalarGaussianMixture, max_order: u32) -> Vec<f64> {
    let mut raw: Vec<f64> = (0..=max_order)
        .map(|i| {
            gm.components
                .iter()
                .map(|(w, g)| w * gaussian_raw_moment(i, g))
                .sum()
        })
        .collect();
    raw[0] = 1.0;
    raw
}

/// Central moments from raw moments `E_0 = 1, E_1, …`.
pub fn mixture_central_moments(raw: &[f64]) -> Vec<f64> {
    if raw.is_empty() {
        return Vec::new();
    }
    let mean = raw.get(1).copied().unwrap_or(0.0);
    (0..raw.len())
        .map(|i| {
            let binom = binomial_row(i);
            (0..=i)
                .map(|j| binom[j] * raw[i - j] * powu(-mean, j as u32))
                .sum()
        })
        .collect()
}

/// Residual weighting per target entry.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Weighting {
    #[default]
    Uniform,
    /// `1 / max(1, |ẽ_κ|)`.
    InverseMagnitude,
    /// Weight by total order `|κ|`; missing orders get weight 1.
    PerOrder(Vec<f64>),
    /// Explicit weight per index; missing indices get weight 1.
    PerIndex(Vec<(MultiIndex, f64)>),
}

impl Weighting {
    pub fn weight(&self, index: &MultiIndex, target: f64) -> f64 {
        match self {
            Weighting::Uniform => 1.0,
            Weighting::InverseMagnitude => 1.0 / abs(target).max(1.0),
            Weighting::PerOrder(w) => w.get(index.order() as usize).copied().unwrap_or(1.0),
            Weighting::PerIndex(list) => list
                .iter()
                .find(|(k, _)| k == index)
                .map_or(1.0, |(_, w)| *w),
        }
    }
}

/// Weighted residuals `w_κ (e_κ − ẽ_κ)` over the target indices present in
/// `actual`, in canonical order, together with their Euclidean norm.
pub fn residual(
    actual: &MomentTable,
    target: &MomentTable,
    weighting: Option<&Weighting>,
) -> Result<(Vec<(MultiIndex, f64)>, f64)> {
    check_dim(target.dim, actual.dim)?;
    let uniform = Weighting::Uniform;
    let weighting = weighting.unwrap_or(&uniform);
    let mut out = Vec::with_capacity(target.len());
    let mut sq = 0.0;
    for (index, t) in target.iter() {
        if let Some(a) = actual.get(index) {
            let r = weighting.weight(index, t) * (a - t);
            sq += r * r;
            out.push((index.clone(), r));
        }
    }
    Ok((out, sqrt(sq)))
}

#[cfg(feature = "serde")]
mod serde_repr {
    use super::*;
    use alloc::string::String;

    #[derive(serde::Serialize, serde::Deserialize)]
    pub struct EntryRepr {
        pub index: MultiIndex,
        pub value: f64,
    }

    #[derive(serde::Serialize, serde::Deserialize)]
    pub struct MomentTableRepr {
        pub dim: usize,
        pub order: u32,
        pub entries: Vec<EntryRepr>,
    }

    impl From<MomentTable> for MomentTableRepr {
        fn from(t: MomentTable) -> Self {
            Self {
                dim: t.dim,
                order: t.order,
                entries: t
                    .entries
                    .into_iter()
                    .map(|(index, value)| EntryRepr { index, value })
                    .collect(),
            }
        }
    }

    impl TryFrom<MomentTableRepr> for MomentTable {
        type Error = String;
        fn try_from(r: MomentTableRepr) -> core::result::Result<Self, String> {
            let mut t = MomentTable::new(r.dim, r.order).map_err(|e| format!("{e}"))?;
            for e in r.entries {
                t.insert(e.index, e.value).map_err(|e| format!("{e}"))?;
            }
            Ok(t)
        }
    }

    #[derive(serde::Serialize, serde::Deserialize)]
    pub struct DiracMixtureRepr {
        pub dim: usize,
        pub locations: Vec<Vec<f64>>,
        pub weights: Vec<f64>,
    }

    impl From<DiracMixture> for DiracMixtureRepr {
        fn from(dm: DiracMixture) -> Self {
            Self {
                dim: dm.dim,
                locations: dm.locations.chunks(dm.dim).map(|c| c.to_vec()).collect(),
                weights: dm.weights,
            }
        }
    }

    impl TryFrom<DiracMixtureRepr> for DiracMixture {
        type Error = String;
        fn try_from(r: DiracMixtureRepr) -> core::result::Result<Self, String> {
            if r.locations.iter().any(|p| p.len() != r.dim) {
                return Err(format!("every location must have {} coordinates", r.dim));
            }
            let flat = r.locations.concat();
            DiracMixture::new_unchecked_distinct(r.dim, flat, r.weights).map_err(|e| format!("{e}"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn idx(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn symmetric_pair_moments() {
        let dm = DiracMixture::equally_weighted(1, vec![-1.0, 1.0]).unwrap();
        let t = dirac_moments(&dm, 2);
        assert_eq!(t.get(&idx(&[0])), Some(1.0));
        assert_eq!(t.get(&idx(&[1])), Some(0.0));
        assert_eq!(t.get(&idx(&[2])), Some(1.0));
    }

    #[test]
    fn point_mass_at_origin() {
        let dm = DiracMixture::new(2, vec![0.0, 0.0], vec![1.0]).unwrap();
        let t = dirac_moments(&dm, 2);
        assert_eq!(t.len(), 6);
        for (k, v) in t.iter() {
            assert_eq!(v, if k.is_zero() { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn weighted_power_sums() {
        let dm = DiracMixture::new(1, vec![1.0, 2.0, 3.0], vec![0.2, 0.3, 0.5]).unwrap();
        let t = dirac_moments(&dm, 3);
        // 0.2 + 0.6 + 1.5, 0.2 + 1.2 + 4.5, 0.2 + 2.4 + 13.5
        assert_relative_eq!(t.get(&idx(&[1])).unwrap(), 2.3, max_relative = 1e-14);
        assert_relative_eq!(t.get(&idx(&[2])).unwrap(), 5.9, max_relative = 1e-14);
        assert_relative_eq!(t.get(&idx(&[3])).unwrap(), 16.1, max_relative = 1e-14);
    }

    #[test]
    fn scalar_gradient() {
        let dm = DiracMixture::new(1, vec![2.0], vec![1.0]).unwrap();
        let g = dirac_moment_gradient(&dm, &idx(&[2])).unwrap();
        assert_eq!(g[(0, 0)], 4.0);
    }

    #[test]
    fn zero_index_gradient_vanishes() {
        let dm = DiracMixture::equally_weighted(2, vec![0.3, -1.0, 2.0, 0.5]).unwrap();
        let g = dirac_moment_gradient(&dm, &MultiIndex::zero(2)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mixed_gradient_against_central_differences() {
        let dm = DiracMixture::new(2, vec![1.0, 1.0], vec![1.0]).unwrap();
        let g = dirac_moment_gradient(&dm, &idx(&[1, 1])).unwrap();
        let h = 1e-6;
        let f = |x: f64, y: f64| x * y;
        let fd_x = (f(1.0 + h, 1.0) - f(1.0 - h, 1.0)) / (2.0 * h);
        let fd_y = (f(1.0, 1.0 + h) - f(1.0, 1.0 - h)) / (2.0 * h);
        assert_relative_eq!(g[(0, 0)], fd_x, max_relative = 1e-8);
        assert_relative_eq!(g[(1, 0)], fd_y, max_relative = 1e-8);
        assert_relative_eq!(g[(0, 0)], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn central_moment_table() {
        assert_eq!(gaussian_central_moment(0, 2.0), 1.0);
        assert_eq!(gaussian_central_moment(4, 1.0), 3.0);
        assert_eq!(gaussian_central_moment(3, 2.0), 0.0);
        assert_eq!(gaussian_central_moment(8, 1.0), 105.0);
        assert_eq!(gaussian_central_moment(6, 2.0), 15.0 * 64.0);
    }

    #[test]
    fn raw_moment_closed_forms() {
        let g = ScalarGaussian::new(1.3, 0.4).unwrap();
        let (m, s) = (g.mean, g.std);
        assert_relative_eq!(
            gaussian_raw_moment(2, &g),
            m * m + s * s,
            max_relative = 1e-14
        );
        assert_eq!(gaussian_raw_moment(6, &ScalarGaussian::standard()), 15.0);
        assert_eq!(gaussian_raw_moment(0, &g), 1.0);
    }

    #[test]
    fn mixture_moments_by_hand() {
        let gm = ScalarGaussianMixture::new(vec![
            (0.4, ScalarGaussian::new(-1.5, 0.7).unwrap()),
            (0.6, ScalarGaussian::new(1.5, 0.7).unwrap()),
        ])
        .unwrap();
        let raw = mixture_raw_moments(&gm, 4);
        // E_1 = 0.4(-1.5) + 0.6(1.5); E_2 = 1.5^2 + 0.7^2 for both components.
        assert_relative_eq!(raw[1], 0.3, max_relative = 1e-14);
        assert_relative_eq!(raw[2], 2.74, max_relative = 1e-14);
        // E_3 = 0.2 (1.5^3 + 3·1.5·0.49)
        assert_relative_eq!(raw[3], 0.2 * (3.375 + 2.205), max_relative = 1e-14);
        // E_4 identical for both components: 1.5^4 + 6·1.5^2·0.49 + 3·0.49^2
        assert_relative_eq!(raw[4], 5.0625 + 6.615 + 0.7203, max_relative = 1e-14);
        assert_eq!(raw[0], 1.0);
    }

    #[test]
    fn degenerate_mixture_matches_single_gaussian() {
        let g = ScalarGaussian::new(-0.7, 1.9).unwrap();
        let gm = ScalarGaussianMixture::new(vec![(1.0, g)]).unwrap();
        let raw = mixture_raw_moments(&gm, 8);
        for i in 0..=8 {
            assert_eq!(raw[i], gaussian_raw_moment(i as u32, &g));
        }
        let central = mixture_central_moments(&raw);
        assert_relative_eq!(central[2], g.std * g.std, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_pair_has_zero_odd_moments() {
        let gm = ScalarGaussianMixture::new(vec![
            (0.5, ScalarGaussian::new(-2.0, 0.3).unwrap()),
            (0.5, ScalarGaussian::new(2.0, 0.3).unwrap()),
        ])
        .unwrap();
        let raw = mixture_raw_moments(&gm, 7);
        for i in [1, 3, 5, 7] {
            assert_eq!(raw[i], 0.0, "E_{i}");
        }
    }

    #[test]
    fn residual_cases() {
        let dm = DiracMixture::equally_weighted(1, vec![-0.4, 0.2, 1.7]).unwrap();
        let t = dirac_moments(&dm, 4);
        let (r, n) = residual(&t, &t, None).unwrap();
        assert!(r.iter().all(|(_, v)| *v == 0.0));
        assert_eq!(n, 0.0);

        let a = MomentTable::from_entries(1, [(idx(&[2]), 1.0)]).unwrap();
        let b = MomentTable::from_entries(1, [(idx(&[2]), 3.0)]).unwrap();
        let (r, n) = residual(&a, &b, None).unwrap();
        assert_eq!(r, vec![(idx(&[2]), -2.0)]);
        assert_eq!(n, 2.0);

        let c = MomentTable::new(2, 2).unwrap();
        assert!(matches!(
            residual(&a, &c, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_weight_ignores_index() {
        let a = MomentTable::from_entries(1, [(idx(&[1]), 0.5), (idx(&[2]), 1.0)]).unwrap();
        let b = MomentTable::from_entries(1, [(idx(&[1]), 0.0), (idx(&[2]), 1.0)]).unwrap();
        let w = Weighting::PerIndex(vec![(idx(&[1]), 0.0)]);
        let (_, n) = residual(&a, &b, Some(&w)).unwrap();
        assert_eq!(n, 0.0);
    }

    #[test]
    fn table_invariants() {
        let mut t = MomentTable::new(2, 2).unwrap();
        assert!(t.insert(idx(&[0, 0]), 0.9).is_err());
        assert!(t.insert(idx(&[2, 1]), 0.1).is_err());
        assert!(t.insert(idx(&[1]), 0.1).is_err());
        t.insert(idx(&[0, 0]), 1.0).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn mixture_validation() {
        assert!(DiracMixture::new(1, vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiracMixture::new(1, vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(matches!(
            DiracMixture::equally_weighted(1, vec![2.0, 2.0]),
            Err(Error::Degenerate(_))
        ));
    }

    proptest! {
        #[test]
        fn affine_pushforward(
            xs in proptest::collection::vec(-3.0f64..3.0, 2..8),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let l = xs.len();
            let w = vec![1.0 / l as f64; l];
            let moved: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let e = |p: &[f64], k: u32| power_sums(1, p, &w, &idx(&[k]));
            let (e1, e2) = (e(&xs, 1), e(&xs, 2));
            prop_assert!((e(&moved, 1) - (a * e1 + b)).abs() < 1e-12);
            prop_assert!((e(&moved, 2) - (a * a * e2 + 2.0 * a * b * e1 + b * b)).abs() < 1e-11);
        }

        #[test]
        fn mixture_central_first_moment_vanishes(
            comps in proptest::collection::vec((0.05f64..1.0, -3.0f64..3.0, 0.1f64..2.0), 1..5),
        ) {
            let total: f64 = comps.iter().map(|c| c.0).sum();
            let mut list: Vec<(f64, ScalarGaussian)> = comps
                .iter()
                .map(|&(w, m, s)| (w / total, ScalarGaussian::new(m, s).unwrap()))
                .collect();
            // Renormalize the last weight so the sum is 1 within rounding.
            let head: f64 = list[..list.len() - 1].iter().map(|c| c.0).sum();
            let last = list.len() - 1;
            list[last].0 = 1.0 - head;
            prop_assume!(list[last].0 >= 0.0);
            let gm = ScalarGaussianMixture::new(list).unwrap();
            let central = mixture_central_moments(&mixture_raw_moments(&gm, 6));
            prop_assert_eq!(central[0], 1.0);
            prop_assert_eq!(central[1], 0.0);
        }
    }
}
