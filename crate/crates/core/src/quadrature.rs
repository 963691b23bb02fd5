//! Gauss–Legendre rules and sphere rules.

use std::f64::consts::PI;

use crate::grid::Point;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| (a + half * (xi + 1.0), half * wi))
        .collect()
}

/// Unit directions and weights on S^{dim-1}; weights sum to the sphere area.
///
/// 2D: `count` equally spaced angles offset by half a step. 3D: `count`
/// Gauss–Legendre nodes in cos θ times `2·count` azimuths.
pub fn sphere_rule(dim: usize, count: usize) -> Vec<(Point, f64)> {
    if dim == 2 {
        let dt = 2.0 * PI / count as f64;
        (0..count)
            .map(|j| {
                let t = (j as f64 + 0.5) * dt;
                ([t.cos(), t.sin(), 0.0], dt)
            })
            .collect()
    } else {
        let (z, wz) = gauss_legendre(count);
        let naz = 2 * count;
        let dp = 2.0 * PI / naz as f64;
        let mut out = Vec::with_capacity(count * naz);
        for (zi, wi) in z.iter().zip(&wz) {
            let s = (1.0 - zi * zi).max(0.0).sqrt();
            for j in 0..naz {
                let p = (j as f64 + 0.5) * dp;
                out.push(([*zi, s * p.cos(), s * p.sin()], wi * dp));
            }
        }
        out
    }
}
