//! Small numeric helpers shared across modules.

use alloc::vec;
use alloc::vec::Vec;

/// `x^k` by repeated squaring. Sign-symmetric: `powu(-x, k) == ±powu(x, k)` bitwise.
#[inline]
pub(crate) fn powu(x: f64, k: u32) -> f64 {
    let mut base = x;
    let mut exp = k;
    let mut acc = 1.0;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        exp >>= 1;
        if exp > 0 {
            base *= base;
        }
    }
    acc
}

/// Row `n` of Pascal's triangle, built by the additive recurrence.
pub(crate) fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for i in 1..n {
        for j in (1..=i).rev() {
            row[j] += row[j - 1];
        }
    }
    row
}

/// `(i-1)!!` for even `i`, i.e. the product of odd numbers below `i`.
pub(crate) fn odd_double_factorial(i: u32) -> f64 {
    let mut acc = 1.0;
    let mut j = 1;
    while j < i {
        acc *= j as f64;
        j += 2;
    }
    acc
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(abs(*v)))
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pascal_rows() {
        assert_eq!(binomial_row(0), vec![1.0]);
        assert_eq!(binomial_row(4), vec![1.0, 4.0, 6.0, 4.0, 1.0]);
        assert_eq!(binomial_row(20)[10], 184756.0);
    }

    #[test]
    fn double_factorials() {
        assert_eq!(odd_double_factorial(0), 1.0);
        assert_eq!(odd_double_factorial(2), 1.0);
        assert_eq!(odd_double_factorial(4), 3.0);
        assert_eq!(odd_double_factorial(8), 105.0);
    }

    #[test]
    fn integer_powers() {
        assert_eq!(powu(0.5, 3), 0.125);
        assert_eq!(powu(7.0, 0), 1.0);
        assert_eq!(powu(-1.3, 5), -powu(1.3, 5));
        assert_eq!(powu(0.0, 0), 1.0);
    }
}
