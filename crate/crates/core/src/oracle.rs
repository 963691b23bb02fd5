//! Homogeneous oracle fields `r^{m/2} |cos(mθ/2)|` split into their m nodal
//! sectors.
//!
//! `(r, θ)` are polar coordinates in the plane of the last two axes, so in 3D
//! the fields are invariant along the first axis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SegregatedField;
use crate::grid::{Grid, Point};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub m: usize,
    pub rotation: f64,
    pub center: Point,
}

impl OracleSpec {
    pub fn new(m: usize, center: Point) -> Self {
        OracleSpec {
            m,
            rotation: 0.0,
            center,
        }
    }

    pub fn rotated(mut self, rotation: f64) -> Self {
        self.rotation = rotation;
        self
    }

    /// Sector index and value at `p`.
    pub fn value(&self, dim: usize, p: &Point) -> (usize, f64) {
        let a = p[dim - 2] - self.center[dim - 2];
        let b = p[dim - 1] - self.center[dim - 1];
        let r = a.hypot(b);
        if r == 0.0 {
            return (0, 0.0);
        }
        let m = self.m as f64;
        let theta = b.atan2(a) - self.rotation;
        let sector = (theta * m / (2.0 * PI)).round().rem_euclid(m) as usize % self.m;
        (sector, r.powf(m / 2.0) * (m * theta / 2.0).cos().abs())
    }

    /// Vanishing order m/2.
    pub fn order(&self) -> f64 {
        self.m as f64 / 2.0
    }
}

/// Samples the oracle on every domain node. Eigenvalues are zero and the
/// field keeps its (nonzero) boundary values.
pub fn make_oracle(grid: &Grid, spec: &OracleSpec) -> Result<SegregatedField> {
    if spec.m < 2 {
        return Err(Error::arg("m", format!("{} < 2", spec.m)));
    }
    if grid.domain().signed_distance(&spec.center) < 0.0 {
        return Err(Error::arg("center", "outside the domain"));
    }
    let dim = grid.dim();
    let mut comps = vec![vec![0.0; grid.len()]; spec.m];
    for i in 0..grid.len() {
        if grid.domain_mask()[i] {
            let (k, v) = spec.value(dim, &grid.coords(i));
            comps[k][i] = v;
        }
    }
    SegregatedField::new(grid.clone(), comps, vec![0.0; spec.m], false)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleFit {
    pub rotation: f64,
    /// Root-mean-square distance between |u| and the fitted |oracle| on the
    /// field's domain, both at unit average L².
    pub distance: f64,
}

/// Best rotation of the m-oracle centered at `center` matching the modulus of
/// `field`, by a grid search over one period followed by golden-section
/// refinement.
pub fn fit_oracle_rotation(field: &SegregatedField, m: usize, center: Point) -> Result<OracleFit> {
    if m < 2 {
        return Err(Error::arg("m", format!("{m} < 2")));
    }
    let grid = field.grid();
    let dim = grid.dim();
    let w = grid.weights();
    let nodes: Vec<(Point, f64, f64)> = (0..grid.len())
        .filter(|&i| w[i] > 0.0)
        .map(|i| {
            let modulus = field.components().iter().map(|c| c[i]).fold(0.0, f64::max);
            (grid.coords(i), w[i], modulus)
        })
        .collect();
    let vol: f64 = nodes.iter().map(|n| n.1).sum();
    let umass: f64 = nodes.iter().map(|n| n.1 * n.2 * n.2).sum();
    if umass <= 0.0 {
        return Err(Error::Degenerate("field vanishes".into()));
    }
    let uscale = (vol / umass).sqrt();
    let cost = |rot: f64| -> f64 {
        let spec = OracleSpec::new(m, center).rotated(rot);
        let vals: Vec<f64> = nodes.iter().map(|n| spec.value(dim, &n.0).1).collect();
        let omass: f64 = nodes.iter().zip(&vals).map(|(n, v)| n.1 * v * v).sum();
        let oscale = (vol / omass).sqrt();
        let err: f64 = nodes
            .iter()
            .zip(&vals)
            .map(|(n, v)| {
                let d = uscale * n.2 - oscale * v;
                n.1 * d * d
            })
            .sum();
        (err / vol).sqrt()
    };
    let period = 2.0 * PI / m as f64;
    let steps = 360;
    let dt = period / steps as f64;
    let mut best = (0.0, f64::INFINITY);
    for s in 0..steps {
        let rot = s as f64 * dt;
        let c = cost(rot);
        if c < best.1 {
            best = (rot, c);
        }
    }
    let (mut a, mut b) = (best.0 - dt, best.0 + dt);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..40 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let rot = 0.5 * (a + b);
    let c = cost(rot);
    let (rotation, distance) = if c < best.1 { (rot, c) } else { best };
    Ok(OracleFit {
        rotation: rotation.rem_euclid(period),
        distance,
    })
}
