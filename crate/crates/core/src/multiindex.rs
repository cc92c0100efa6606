//! Multi-indices over `N` dimensions and the valid index sets of a moment table.
//!
//! A [`MultiIndex`] `κ` names the power moment `E{x^κ}`, where
//! `x^κ = x_1^κ_1 · … · x_N^κ_N`. The canonical order is graded
//! lexicographic: ascending total order `|κ|`, then lexicographic on the
//! exponent vector. Every residual vector and serialized table uses it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::math::powu;
use crate::{Error, Result};

/// Largest dimension and order accepted by [`count_moments`].
pub const MAX_COUNT_ARG: usize = 16;

/// Exponent vector of a power moment.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    /// Builds an index from its exponents. Fails on an empty vector.
    pub fn new(exponents: Vec<u32>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::InvalidInput(
                "multi-index must have at least one entry".into(),
            ));
        }
        Ok(Self(exponents))
    }

    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self(vec![0; dim])
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total order `|κ|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }

    /// Componentwise sum. Fails on mismatched dimensions.
    pub fn add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }
}

impl From<MultiIndex> for Vec<u32> {
    fn from(k: MultiIndex) -> Self {
        k.0
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// All `κ ∈ N_0^dim` with `|κ| ≤ max_order`, in graded lexicographic order.
///
/// Panics if `dim == 0`.
pub fn enumerate_indices(dim: usize, max_order: u32) -> Vec<MultiIndex> {
    assert!(dim >= 1, "dimension must be at least 1");
    let mut out = Vec::new();
    let mut scratch = vec![0u32; dim];
    for order in 0..=max_order {
        compositions(&mut scratch, 0, order, &mut out);
    }
    out
}

// Writes every exponent vector with entries `pos..` summing to `remaining`,
// lexicographically ascending.
fn compositions(scratch: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.push(MultiIndex(scratch.to_vec()));
        return;
    }
    for first in 0..=remaining {
        scratch[pos] = first;
        compositions(scratch, pos + 1, remaining - first, out);
    }
}

/// Number of moments of order at most `max_order` in `dim` dimensions,
/// `(M+N)! / (M! N!)`.
///
/// Both arguments are limited to [`MAX_COUNT_ARG`].
pub fn count_moments(dim: usize, max_order: usize) -> Result<u64> {
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    if dim > MAX_COUNT_ARG || max_order > MAX_COUNT_ARG {
        return Err(Error::Range(format!(
            "count_moments supports N, M <= {MAX_COUNT_ARG}, got N={dim}, M={max_order}"
        )));
    }
    // binom(n, k) with k = min(N, M); every prefix product is itself a binomial.
    let n = (dim + max_order) as u64;
    let k = dim.min(max_order) as u64;
    let mut acc: u64 = 1;
    for i in 1..=k {
        acc = acc
            .checked_mul(n - k + i)
            .ok_or_else(|| Error::Range("moment count overflow".into()))?
            / i;
    }
    Ok(acc)
}

/// `x^κ`. Returns 1 for the zero index regardless of `x`.
pub fn monomial(x: &[f64], index: &MultiIndex) -> Result<f64> {
    check_dim(index.dim(), x.len())?;
    Ok(monomial_unchecked(x, index.exponents()))
}

#[inline]
pub(crate) fn monomial_unchecked(x: &[f64], exponents: &[u32]) -> f64 {
    x.iter().zip(exponents).fold(
        1.0,
        |acc, (&xi, &k)| if k == 0 { acc } else { acc * powu(xi, k) },
    )
}
