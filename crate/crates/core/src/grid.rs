//! Uniform Cartesian grids over simple domains.
//!
//! Masks are pure functions of the domain descriptor and the spacing, so a
//! grid can be rebuilt bit-for-bit from its descriptor.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points always carry three coordinates; the third is zero in 2D.
pub type Point = [f64; 3];

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

/// Pads a coordinate slice to a [`Point`].
pub fn point(coords: &[f64]) -> Point {
    let mut p = [0.0; 3];
    for (dst, src) in p.iter_mut().zip(coords) {
        *dst = *src;
    }
    p
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Rectangle { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
}

impl Domain {
    pub fn unit_square() -> Self {
        Domain::Rectangle {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        }
    }

    pub fn rectangle(lo: &[f64], hi: &[f64]) -> Self {
        Domain::Rectangle {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        }
    }

    pub fn unit_disk() -> Self {
        Domain::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn ball(center: &[f64], radius: f64) -> Self {
        Domain::Ball {
            center: center.to_vec(),
            radius,
        }
    }

    pub fn annulus(center: &[f64], inner: f64, outer: f64) -> Self {
        Domain::Annulus {
            center: center.to_vec(),
            inner,
            outer,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Rectangle { lo, .. } => lo.len(),
            Domain::Ball { center, .. } | Domain::Annulus { center, .. } => center.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if !(2..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} not in {{2,3}}")));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Domain::Rectangle { lo, hi } => {
                if hi.len() != d || !finite(lo) || !finite(hi) {
                    return Err(Error::InvalidGrid("rectangle corners malformed".into()));
                }
                if lo.iter().zip(hi).any(|(a, b)| b <= a) {
                    return Err(Error::InvalidGrid("rectangle has empty extent".into()));
                }
            }
            Domain::Ball { center, radius } => {
                if !finite(center) || !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidGrid("ball radius must be positive".into()));
                }
            }
            Domain::Annulus {
                center,
                inner,
                outer,
            } => {
                if !finite(center) || !(*inner > 0.0 && outer > inner && outer.is_finite()) {
                    return Err(Error::InvalidGrid("annulus needs 0 < inner < outer".into()));
                }
            }
        }
        Ok(())
    }

    /// Signed distance to the boundary, positive inside.
    pub fn signed_distance(&self, p: &Point) -> f64 {
        match self {
            Domain::Rectangle { lo, hi } => {
                let mut inside = f64::INFINITY;
                let mut outside = 0.0;
                for a in 0..lo.len() {
                    let lo_gap = p[a] - lo[a];
                    let hi_gap = hi[a] - p[a];
                    inside = inside.min(lo_gap.min(hi_gap));
                    let excess = (-lo_gap).max(-hi_gap).max(0.0);
                    outside += excess * excess;
                }
                if inside >= 0.0 {
                    inside
                } else {
                    -outside.sqrt()
                }
            }
            Domain::Ball { center, radius } => radius - dist(p, &point(center)),
            Domain::Annulus {
                center,
                inner,
                outer,
            } => {
                let rho = dist(p, &point(center));
                (outer - rho).min(rho - inner)
            }
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounds(&self) -> (Point, Point) {
        match self {
            Domain::Rectangle { lo, hi } => (point(lo), point(hi)),
            Domain::Ball { center, radius: r }
            | Domain::Annulus {
                center, outer: r, ..
            } => {
                let c = point(center);
                let mut lo = c;
                let mut hi = c;
                for a in 0..center.len() {
                    lo[a] -= r;
                    hi[a] += r;
                }
                (lo, hi)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Grid {
    dim: usize,
    shape: [usize; 3],
    spacing: f64,
    origin: Point,
    domain: Domain,
    domain_mask: Vec<bool>,
    boundary_mask: Vec<bool>,
    weights: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.shape == other.shape
            && self.spacing.to_bits() == other.spacing.to_bits()
            && self.origin.map(f64::to_bits) == other.origin.map(f64::to_bits)
            && self.domain == other.domain
    }
}

impl Grid {
    /// Builds the grid covering `domain` with spacing `h`.
    ///
    /// Rectangles must be an integer number of cells wide along every axis;
    /// balls and annuli get a node at the center.
    pub fn from_domain(domain: Domain, h: f64) -> Result<Self> {
        domain.validate()?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing {h} must be positive")));
        }
        let dim = domain.dim();
        let mut shape = [1usize; 3];
        let mut origin = [0.0; 3];
        match &domain {
            Domain::Rectangle { lo, hi } => {
                for a in 0..dim {
                    let cells = (hi[a] - lo[a]) / h;
                    let n = cells.round();
                    if (cells - n).abs() > 1e-6 || n < 2.0 {
                        return Err(Error::InvalidGrid(format!(
                            "extent {} along axis {a} is not a multiple of h = {h}",
                            hi[a] - lo[a]
                        )));
                    }
                    shape[a] = n as usize + 1;
                    origin[a] = lo[a];
                }
            }
            Domain::Ball { center, radius: r }
            | Domain::Annulus {
                center, outer: r, ..
            } => {
                let half = (r / h - 1e-9).ceil().max(1.0) as usize;
                for a in 0..dim {
                    shape[a] = 2 * half + 1;
                    origin[a] = center[a] - half as f64 * h;
                }
            }
        }
        let total = shape.iter().product::<usize>();
        if total > 200_000_000 {
            return Err(Error::InvalidGrid(format!("{total} nodes is too many")));
        }

        let mut grid = Grid {
            dim,
            shape,
            spacing: h,
            origin,
            domain,
            domain_mask: Vec::new(),
            boundary_mask: Vec::new(),
            weights: Vec::new(),
        };
        let tol = 1e-9 * h;
        grid.domain_mask = (0..total)
            .map(|i| grid.domain.signed_distance(&grid.coords(i)) >= -tol)
            .collect();
        if !grid.domain_mask.iter().any(|&b| b) {
            return Err(Error::InvalidGrid("domain contains no grid nodes".into()));
        }
        grid.boundary_mask = (0..total)
            .map(|i| {
                if !grid.domain_mask[i] {
                    return false;
                }
                if grid.domain.signed_distance(&grid.coords(i)) <= tol {
                    return true;
                }
                grid.axis_neighbors(i)
                    .iter()
                    .any(|nb| nb.is_none_or(|j| !grid.domain_mask[j]))
            })
            .collect();
        grid.check_connected()?;
        grid.weights = grid.compute_weights();
        Ok(grid)
    }

    fn check_connected(&self) -> Result<()> {
        let start = self
            .domain_mask
            .iter()
            .position(|&b| b)
            .expect("nonempty mask");
        let mut seen = vec![false; self.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut count = 1usize;
        while let Some(i) = queue.pop_front() {
            for j in self.axis_neighbors(i).into_iter().flatten() {
                if self.domain_mask[j] && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        let total = self.domain_mask.iter().filter(|&&b| b).count();
        if count != total {
            return Err(Error::InvalidGrid(format!(
                "domain mask has {} disconnected nodes",
                total - count
            )));
        }
        Ok(())
    }

    // Rectangles get exact trapezoid cell fractions; curved domains give every
    // domain node a full cell (lattice counting), which keeps the weights
    // uniform on interior nodes.
    fn compute_weights(&self) -> Vec<f64> {
        let h = self.spacing;
        let cell = h.powi(self.dim as i32);
        (0..self.len())
            .map(|i| {
                if !self.domain_mask[i] {
                    return 0.0;
                }
                match &self.domain {
                    Domain::Rectangle { lo, hi } => {
                        let x = self.coords(i);
                        let mut frac = 1.0;
                        for a in 0..self.dim {
                            let a0 = (x[a] - 0.5 * h).max(lo[a]);
                            let a1 = (x[a] + 0.5 * h).min(hi[a]);
                            frac *= ((a1 - a0) / h).max(0.0);
                        }
                        cell * frac
                    }
                    _ => cell,
                }
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Node counts per axis; unused axes report 1.
    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    pub(crate) fn shape3(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn domain_mask(&self) -> &[bool] {
        &self.domain_mask
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    /// Cell-volume quadrature weight of each node.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.domain_mask[i] && !self.boundary_mask[i]
    }

    pub fn index(&self, m: [usize; 3]) -> usize {
        (m[0] * self.shape[1] + m[1]) * self.shape[2] + m[2]
    }

    pub fn multi_index(&self, i: usize) -> [usize; 3] {
        let i2 = i % self.shape[2];
        let rest = i / self.shape[2];
        [rest / self.shape[1], rest % self.shape[1], i2]
    }

    pub fn coords(&self, i: usize) -> Point {
        let m = self.multi_index(i);
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.origin[a] + m[a] as f64 * self.spacing;
        }
        p
    }

    /// Neighbors along ±axis, `None` when off the grid. Unused axes are skipped.
    pub fn axis_neighbors(&self, i: usize) -> Vec<Option<usize>> {
        let m = self.multi_index(i);
        let mut out = Vec::with_capacity(2 * self.dim);
        for a in 0..self.dim {
            let stride = self.stride(a);
            out.push((m[a] > 0).then(|| i - stride));
            out.push((m[a] + 1 < self.shape[a]).then(|| i + stride));
        }
        out
    }

    pub(crate) fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.shape[1] * self.shape[2],
            1 => self.shape[2],
            _ => 1,
        }
    }

    /// True when `p` lies in the closed bounding box of the nodes.
    pub fn contains_point(&self, p: &Point) -> bool {
        let eps = 1e-9 * self.spacing;
        (0..self.dim).all(|a| {
            let hi = self.origin[a] + (self.shape[a] - 1) as f64 * self.spacing;
            p[a] >= self.origin[a] - eps && p[a] <= hi + eps
        })
    }

    /// Distance from `p` to the domain boundary (0 outside).
    pub fn distance_to_boundary(&self, p: &Point) -> f64 {
        self.domain.signed_distance(p).max(0.0)
    }

    /// Continuous volume of Ω computed from the node weights.
    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub(crate) fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Lower-corner multi-index and local coordinates of the cell containing `p`.
    pub(crate) fn locate(&self, p: &Point) -> Option<([usize; 3], [f64; 3])> {
        if !self.contains_point(p) {
            return None;
        }
        let mut base = [0usize; 3];
        let mut t = [0.0; 3];
        for a in 0..self.dim {
            let s = (p[a] - self.origin[a]) / self.spacing;
            let cells = self.shape[a] - 1;
            let c = (s.floor().max(0.0) as usize).min(cells.saturating_sub(1));
            base[a] = c;
            t[a] = (s - c as f64).clamp(0.0, 1.0);
        }
        Some((base, t))
    }

    /// Number of cells (lower-corner indices) per axis.
    pub(crate) fn cell_shape(&self) -> [usize; 3] {
        let mut s = [1usize; 3];
        for a in 0..self.dim {
            s[a] = self.shape[a] - 1;
        }
        s
    }

    /// Node indices of the 2^d corners of the cell with lower corner `base`.
    pub(crate) fn cell_corners(&self, base: [usize; 3]) -> Vec<usize> {
        let n = 1 << self.dim;
        (0..n)
            .map(|c| {
                let mut m = base;
                for a in 0..self.dim {
                    if c & (1 << a) != 0 {
                        m[a] += 1;
                    }
                }
                self.index(m)
            })
            .collect()
    }
}
