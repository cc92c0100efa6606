//! Central finite differences, used to verify analytic derivatives.

use alloc::vec::Vec;

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Jacobian of a vector map with `m` outputs, row-major `m × n`.
pub fn fd_jacobian<F: Fn(&[f64], &mut [f64])>(f: F, m: usize, x: &[f64], h: f64) -> Vec<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let n = x.len();
    let mut out = alloc::vec![0.0; m * n];
    let mut probe = x.to_vec();
    let mut up = alloc::vec![0.0; m];
    let mut down = alloc::vec![0.0; m];
    for j in 0..n {
        probe[j] = x[j] + h;
        f(&probe, &mut up);
        probe[j] = x[j] - h;
        f(&probe, &mut down);
        probe[j] = x[j];
        for i in 0..m {
            out[i * n + j] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    out
}
