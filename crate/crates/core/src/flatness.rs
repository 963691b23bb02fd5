//! Mean flatness of weighted point measures, best affine planes and
//! quantitative spanning.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dist, dot, norm, sub, Point};
use crate::singular::{Classification, SingularSample};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct PointMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawMeasure {
    dim: usize,
    atoms: Vec<RawAtom>,
}

#[derive(Deserialize)]
struct RawAtom {
    point: Vec<f64>,
    #[serde(default = "unit")]
    weight: f64,
}

fn unit() -> f64 {
    1.0
}

impl TryFrom<RawMeasure> for PointMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        let mut atoms = Vec::with_capacity(raw.atoms.len());
        for a in raw.atoms {
            if a.point.len() != raw.dim {
                return Err(Error::arg("atoms", format!("point {:?} is not {}-dimensional", a.point, raw.dim)));
            }
            atoms.push(Atom {
                point: crate::grid::point(&a.point),
                weight: a.weight,
            });
        }
        PointMeasure::new(raw.dim, atoms)
    }
}

impl PointMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::arg("dim", format!("{dim} not in 2..=3")));
        }
        for a in &atoms {
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return Err(Error::arg("weight", format!("{} is not finite and nonnegative", a.weight)));
            }
            if !a.point.iter().all(|c| c.is_finite()) || a.point[dim..].iter().any(|&c| c != 0.0) {
                return Err(Error::arg("point", format!("{:?} invalid for dimension {dim}", a.point)));
            }
        }
        Ok(PointMeasure { dim, atoms })
    }

    /// Unit masses on the given points.
    pub fn unit_masses(dim: usize, points: &[Point]) -> Result<Self> {
        Self::new(
            dim,
            points.iter().map(|&point| Atom { point, weight: 1.0 }).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Atoms strictly inside `B_r(x)`.
    pub fn in_ball<'a>(&'a self, x: &'a Point, r: f64) -> impl Iterator<Item = &'a Atom> + 'a {
        self.atoms.iter().filter(move |a| dist(&a.point, x) < r)
    }
}

/// An affine plane through `point` spanned by orthonormal `directions`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePlane {
    pub point: Point,
    pub directions: Vec<Point>,
}

impl AffinePlane {
    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    pub fn distance(&self, p: &Point) -> f64 {
        norm(&self.residual(p))
    }

    fn residual(&self, p: &Point) -> Point {
        let mut d = sub(p, &self.point);
        for v in &self.directions {
            let c = dot(&d, v);
            for a in 0..3 {
                d[a] -= c * v[a];
            }
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub barycenter: Point,
    /// n×n second-moment matrix about the barycenter.
    pub matrix: DMatrix<f64>,
}

/// Mass, barycenter and second moments of μ restricted to the open ball.
pub fn barycenter_moments(mu: &PointMeasure, x: &Point, r: f64) -> Result<Moments> {
    let n = mu.dim;
    let mut mass = 0.0;
    let mut bar = [0.0; 3];
    for a in mu.in_ball(x, r) {
        mass += a.weight;
        for i in 0..n {
            bar[i] += a.weight * a.point[i];
        }
    }
    if !(mass > 0.0) {
        return Err(Error::EmptyMeasure {
            center: *x,
            radius: r,
        });
    }
    for b in bar.iter_mut().take(n) {
        *b /= mass;
    }
    let mut m = DMatrix::zeros(n, n);
    for a in mu.in_ball(x, r) {
        let d = sub(&a.point, &bar);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += a.weight * d[i] * d[j];
            }
        }
    }
    Ok(Moments {
        mass,
        barycenter: bar,
        matrix: m,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessRecord {
    pub center: Point,
    pub radius: f64,
    pub k: usize,
    pub mass: f64,
    pub barycenter: Point,
    /// ξ₁ ≥ … ≥ ξ_n ≥ 0.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Point>,
    pub flatness: f64,
    pub plane: AffinePlane,
}

impl FlatnessRecord {
    pub const CSV_HEADER: [&'static str; 12] = [
        "x", "y", "z", "r", "k", "mass", "bar_x", "bar_y", "bar_z", "xi_1", "xi_2", "flatness",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        let f = |v: f64| format!("{v:.12e}");
        let xi = |i: usize| self.eigenvalues.get(i).copied().unwrap_or(0.0);
        vec![
            f(self.center[0]),
            f(self.center[1]),
            f(self.center[2]),
            f(self.radius),
            self.k.to_string(),
            f(self.mass),
            f(self.barycenter[0]),
            f(self.barycenter[1]),
            f(self.barycenter[2]),
            f(xi(0)),
            f(xi(1)),
            f(self.flatness),
        ]
    }
}

fn check_k(dim: usize, k: usize) -> Result<()> {
    if k >= dim {
        return Err(Error::arg("k", format!("{k} not below the dimension {dim}")));
    }
    Ok(())
}

fn axis(i: usize) -> Point {
    let mut e = [0.0; 3];
    e[i] = 1.0;
    e
}

/// `D_μ^k(x, r) = r^{−k−2} Σ_{ℓ>k} ξ_ℓ`, with the optimal plane through the
/// barycenter spanned by the top k eigenvectors.
pub fn mean_flatness(mu: &PointMeasure, x: &Point, r: f64, k: usize) -> Result<FlatnessRecord> {
    let n = mu.dim;
    check_k(n, k)?;
    if !(r > 0.0) {
        return Err(Error::arg("r", "must be positive"));
    }
    let mom = match barycenter_moments(mu, x, r) {
        Ok(m) => m,
        Err(Error::EmptyMeasure { .. }) => {
            return Ok(FlatnessRecord {
                center: *x,
                radius: r,
                k,
                mass: 0.0,
                barycenter: *x,
                eigenvalues: vec![0.0; n],
                eigenvectors: (0..n).map(axis).collect(),
                flatness: 0.0,
                plane: AffinePlane {
                    point: *x,
                    directions: (0..k).map(axis).collect(),
                },
            })
        }
        Err(e) => return Err(e),
    };
    let eig = SymmetricEigen::new(mom.matrix.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let eigenvectors: Vec<Point> = order
        .iter()
        .map(|&i| {
            let mut v = [0.0; 3];
            for a in 0..n {
                v[a] = eig.eigenvectors[(a, i)];
            }
            v
        })
        .collect();
    let tail: f64 = eigenvalues[k..].iter().sum();
    Ok(FlatnessRecord {
        center: *x,
        radius: r,
        k,
        mass: mom.mass,
        barycenter: mom.barycenter,
        flatness: tail / r.powi(k as i32 + 2),
        plane: AffinePlane {
            point: mom.barycenter,
            directions: eigenvectors[..k].to_vec(),
        },
        eigenvalues,
        eigenvectors,
    })
}

/// Compass search: halves the step when no coordinate move improves.
fn compass(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, floor: f64) -> (Vec<f64>, f64) {
    let mut q = start.to_vec();
    let mut best = f(&q);
    let mut s = step;
    while s > floor {
        let mut moved = false;
        for i in 0..q.len() {
            for sign in [1.0, -1.0] {
                loop {
                    let mut t = q.clone();
                    t[i] += sign * s;
                    let v = f(&t);
                    if v < best {
                        best = v;
                        q = t;
                        moved = true;
                    } else {
                        break;
                    }
                }
            }
        }
        if !moved {
            s *= 0.5;
        }
    }
    (q, best)
}

/// Direct minimization of `r^{−k−2} Σ w dist(y, L)²` over planes L given by
/// offsets and angles. An independent check of [`mean_flatness`].
pub fn brute_force_flatness(mu: &PointMeasure, x: &Point, r: f64, k: usize) -> Result<f64> {
    let n = mu.dim;
    if k > 1 {
        return Err(Error::arg("k", format!("{k} not in 0..=1")));
    }
    check_k(n, k)?;
    let atoms: Vec<Atom> = mu.in_ball(x, r).copied().collect();
    if atoms.len() > 30 {
        return Err(Error::TooLarge(format!("{} atoms in the ball", atoms.len())));
    }
    if atoms.iter().map(|a| a.weight).sum::<f64>() <= 0.0 {
        return Ok(0.0);
    }
    let scale = r.powi(k as i32 + 2);
    let floor = 1e-13 * r.max(1.0);
    let rel = |y: &Point| sub(y, x);
    let value = if k == 0 {
        let f = |q: &[f64]| -> f64 {
            atoms
                .iter()
                .map(|a| {
                    let d = rel(&a.point);
                    a.weight * (0..n).map(|i| (d[i] - q[i]).powi(2)).sum::<f64>()
                })
                .sum()
        };
        compass(&f, &vec![0.0; n], r, floor).1
    } else if n == 2 {
        // line {y : y·(cos θ, sin θ) = c}
        let f = |q: &[f64]| -> f64 {
            let (s, c) = q[0].sin_cos();
            atoms
                .iter()
                .map(|a| {
                    let d = rel(&a.point);
                    a.weight * (d[0] * c + d[1] * s - q[1]).powi(2)
                })
                .sum()
        };
        let mut best = (vec![0.0, 0.0], f64::INFINITY);
        for i in 0..180 {
            let th = std::f64::consts::PI * i as f64 / 180.0;
            let g = |c: &[f64]| f(&[th, c[0]]);
            let (c, v) = compass(&g, &[0.0], r, 1e-6 * r);
            if v < best.1 {
                best = (vec![th, c[0]], v);
            }
        }
        compass(&f, &best.0, 0.02, floor).1
    } else {
        // line through p = a e₁ + b e₂ with direction v(θ, φ), e₁ = ∂_θ v
        let frame = |th: f64, ph: f64| -> (Point, Point, Point) {
            let (st, ct) = th.sin_cos();
            let (sp, cp) = ph.sin_cos();
            let v = [st * cp, st * sp, ct];
            let e1 = [ct * cp, ct * sp, -st];
            let e2 = [-sp, cp, 0.0];
            (v, e1, e2)
        };
        let f = |q: &[f64]| -> f64 {
            let (v, e1, e2) = frame(q[0], q[1]);
            let p = [
                q[2] * e1[0] + q[3] * e2[0],
                q[2] * e1[1] + q[3] * e2[1],
                q[2] * e1[2] + q[3] * e2[2],
            ];
            atoms
                .iter()
                .map(|a| {
                    let d = sub(&rel(&a.point), &p);
                    let t = dot(&d, &v);
                    a.weight * (dot(&d, &d) - t * t)
                })
                .sum()
        };
        let mut best = (vec![0.0; 4], f64::INFINITY);
        let nt = 48;
        for i in 0..=nt {
            let th = std::f64::consts::PI * i as f64 / nt as f64 / 2.0 + 1e-3;
            let nph = ((4.0 * nt as f64 * th.sin()).ceil() as usize).max(1);
            for j in 0..nph {
                let ph = 2.0 * std::f64::consts::PI * j as f64 / nph as f64;
                let g = |o: &[f64]| f(&[th, ph, o[0], o[1]]);
                let (o, v) = compass(&g, &[0.0, 0.0], r, 1e-6 * r);
                if v < best.1 {
                    best = (vec![th, ph, o[0], o[1]], v);
                }
            }
        }
        compass(&f, &best.0, 0.02, floor).1
    };
    Ok(value / scale)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanReport {
    /// Whether k + 1 points ρr-span a k-plane.
    pub spans: bool,
    /// The points chosen, each at distance ≥ ρr from the span of the previous.
    pub chosen: Vec<Point>,
    /// The spanned k-plane on success; on failure a plane of dimension
    /// k − 1 whose ρr-neighborhood holds every point.
    pub plane: AffinePlane,
}

fn orthonormal_push(basis: &mut Vec<Point>, d: Point) -> bool {
    let mut v = d;
    for b in basis.iter() {
        let c = dot(&v, b);
        for a in 0..3 {
            v[a] -= c * b[a];
        }
    }
    let l = norm(&v);
    if l > 1e-12 {
        basis.push([v[0] / l, v[1] / l, v[2] / l]);
        true
    } else {
        false
    }
}

/// Greedy ρr-independence search for `k + 1` points (k defaults to n − 2 in
/// the analysis pipelines).
pub fn rho_span_check(
    points: &[Point],
    x: &Point,
    r: f64,
    rho: f64,
    k: usize,
    dim: usize,
) -> Result<SpanReport> {
    if points.is_empty() {
        return Err(Error::arg("points", "need at least one point"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::arg("rho", format!("{rho} not in (0, 1)")));
    }
    check_k(dim, k)?;
    if let Some(p) = points.iter().find(|p| dist(p, x) > r * (1.0 + 1e-12)) {
        return Err(Error::arg("points", format!("{p:?} outside B_r(x)")));
    }
    let thr = rho * r;
    let p0 = points[0];
    let mut chosen = vec![p0];
    let mut plane = AffinePlane {
        point: p0,
        directions: Vec::new(),
    };
    while chosen.len() < k + 1 {
        let far = points
            .iter()
            .map(|p| (plane.distance(p), *p))
            .max_by(|a, b| a.0.total_cmp(&b.0));
        match far {
            Some((d, p)) if d >= thr => {
                orthonormal_push(&mut plane.directions, sub(&p, &p0));
                chosen.push(p);
            }
            _ => break,
        }
    }
    let spans = chosen.len() == k + 1;
    if !spans {
        let target = k.saturating_sub(1);
        let mut extra: Vec<Point> = points.iter().map(|p| plane.residual(p)).collect();
        extra.sort_by(|a, b| norm(b).total_cmp(&norm(a)));
        extra.extend((0..dim).map(axis));
        for d in extra {
            if plane.directions.len() >= target {
                break;
            }
            orthonormal_push(&mut plane.directions, d);
        }
    }
    Ok(SpanReport {
        spans,
        chosen,
        plane,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeReport {
    pub rho_bar: f64,
    /// Junction samples inside the region.
    pub checked: usize,
    pub violators: Vec<Point>,
}

/// Every junction sample in `B_radius(center)` must lie within `rho_bar` of
/// the spine.
pub fn spine_tube_check(
    samples: &[SingularSample],
    spine: &AffinePlane,
    center: &Point,
    radius: f64,
    rho_bar: f64,
) -> TubeReport {
    let mut checked = 0;
    let mut violators = Vec::new();
    for s in samples {
        if s.classification != Classification::Junction || dist(&s.location, center) >= radius {
            continue;
        }
        checked += 1;
        let d = spine.distance(&s.location);
        if d > rho_bar || (rho_bar == 0.0 && d != 0.0) {
            violators.push(s.location);
        }
    }
    TubeReport {
        rho_bar,
        checked,
        violators,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square() -> PointMeasure {
        PointMeasure::unit_masses(
            2,
            &[[0.5, 0.5, 0.0], [-0.5, 0.5, 0.0], [0.5, -0.5, 0.0], [-0.5, -0.5, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn moments_of_simple_configurations() {
        let mu = PointMeasure::unit_masses(2, &[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap();
        let m = barycenter_moments(&mu, &[0.0; 3], 2.0).unwrap();
        assert_eq!(m.barycenter, [0.0; 3]);
        assert_eq!(m.matrix, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        let m = barycenter_moments(&square(), &[0.0; 3], 2.0).unwrap();
        assert_relative_eq!(m.matrix, DMatrix::identity(2, 2), epsilon = 1e-15);
        let one = PointMeasure::unit_masses(3, &[[0.3, 0.1, 0.2]]).unwrap();
        assert_eq!(barycenter_moments(&one, &[0.0; 3], 1.0).unwrap().matrix, DMatrix::zeros(3, 3));
        assert!(barycenter_moments(&one, &[5.0, 0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn square_corner_flatness() {
        let r = mean_flatness(&square(), &[0.0; 3], 2.0, 1).unwrap();
        assert_eq!(r.flatness, 0.125);
        let r = mean_flatness(&square(), &[0.0; 3], 4.0, 1).unwrap();
        assert_relative_eq!(r.flatness, 1.0 / 64.0, max_relative = 1e-14);
        let b = brute_force_flatness(&square(), &[0.0; 3], 2.0, 1).unwrap();
        assert_relative_eq!(b, 0.125, max_relative = 1e-6);
    }

    #[test]
    fn open_ball_excludes_the_sphere() {
        let mu = PointMeasure::unit_masses(2, &[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(mean_flatness(&mu, &[0.0; 3], 1.0, 0).unwrap().mass, 1.0);
    }

    #[test]
    fn spanning_in_two_and_three_dimensions() {
        let s = rho_span_check(&[[0.1, 0.0, 0.0]], &[0.0; 3], 1.0, 0.5, 0, 2).unwrap();
        assert!(s.spans);
        assert_eq!(s.plane.dim(), 0);
        let pts = [[-0.5, 0.0, 0.0], [0.5, 0.01, 0.0], [0.0, -0.01, 0.02]];
        let s = rho_span_check(&pts, &[0.0; 3], 1.0, 0.1, 1, 3).unwrap();
        assert!(s.spans);
        let s = rho_span_check(&pts, &[0.0; 3], 1.0, 0.1, 2, 3).unwrap();
        assert!(!s.spans);
        assert_eq!(s.plane.dim(), 1);
        assert!(pts.iter().all(|p| s.plane.distance(p) < 0.1));
    }
}
