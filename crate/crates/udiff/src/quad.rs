//! Gauss–Legendre quadrature with panel doubling.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const ORDER: usize = 20;

fn panels(f: &dyn Fn(f64) -> f64, a: f64, b: f64, count: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let h = (b - a) / count as f64;
    let mut acc = 0.0;
    for p in 0..count {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * acc
}

/// Composite 20-point rule, doubling the panel count until two successive
/// values agree to `tol` (absolute plus relative).
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = gauss_legendre(ORDER);
    let mut prev = panels(f, a, b, 1, &rule);
    let mut count = 2;
    while count <= 1 << 14 {
        let next = panels(f, a, b, count, &rule);
        if (next - prev).abs() <= tol * (1.0 + next.abs()) {
            return Ok(next);
        }
        prev = next;
        count *= 2;
    }
    Err(Error::NonConvergence(format!("quadrature on [{a}, {b}] did not settle")))
}
