//! Segregated vector fields with values in the N-branch tree Σ_N.
//!
//! A field stores one nodal array per component. Off-node evaluation
//! interpolates the signed functions `u_k − Σ_{j≠k} u_j`, so interfaces sit at
//! the linear crossing inside a cell instead of being smeared over it.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{Grid, Point};

/// Nearest point of Σ_N: clip negatives, keep the largest entry (lowest index
/// on ties), zero the rest.
pub fn project_to_sigma(y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    let mut best: Option<usize> = None;
    for (k, &v) in y.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|b| v > y[b]) {
            best = Some(k);
        }
    }
    if let Some(k) = best {
        out[k] = y[k];
    }
    out
}

/// Interpolated value of a field at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    /// Dominant component, `None` where the field vanishes.
    pub label: Option<usize>,
    /// Value of the dominant component (≥ 0), i.e. |u(x)|.
    pub value: f64,
    /// Gradient of the dominant component, zero where the field vanishes.
    pub grad: Point,
}

#[derive(Debug)]
struct Sampler {
    sum: Vec<f64>,
    // grads[k * dim + axis][node]; entry k = n_components holds the sum.
    grads: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub struct SegregatedField {
    grid: Grid,
    components: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    dirichlet: bool,
    normalized: bool,
    sampler: OnceLock<Sampler>,
}

impl Clone for SegregatedField {
    fn clone(&self) -> Self {
        SegregatedField {
            grid: self.grid.clone(),
            components: self.components.clone(),
            eigenvalues: self.eigenvalues.clone(),
            dirichlet: self.dirichlet,
            normalized: self.normalized,
            sampler: OnceLock::new(),
        }
    }
}

impl SegregatedField {
    /// Validates the Σ_N constraint and masks. With `dirichlet`, components
    /// must also vanish on boundary nodes.
    pub fn new(
        grid: Grid,
        components: Vec<Vec<f64>>,
        eigenvalues: Vec<f64>,
        dirichlet: bool,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidField("no components".into()));
        }
        if eigenvalues.len() != components.len() {
            return Err(Error::InvalidField(format!(
                "{} eigenvalues for {} components",
                eigenvalues.len(),
                components.len()
            )));
        }
        if eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidField("non-finite eigenvalue".into()));
        }
        let n = grid.len();
        for (k, c) in components.iter().enumerate() {
            if c.len() != n {
                return Err(Error::InvalidField(format!(
                    "component {k} has {} values for {n} nodes",
                    c.len()
                )));
            }
        }
        for i in 0..n {
            let mut positive = 0;
            for (k, c) in components.iter().enumerate() {
                let v = c[i];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidField(format!(
                        "component {k} has value {v} at node {i}"
                    )));
                }
                if v > 0.0 {
                    positive += 1;
                    if !grid.domain_mask()[i] {
                        return Err(Error::InvalidField(format!(
                            "component {k} is nonzero outside the domain at node {i}"
                        )));
                    }
                    if dirichlet && grid.boundary_mask()[i] {
                        return Err(Error::InvalidField(format!(
                            "component {k} is nonzero on the boundary at node {i}"
                        )));
                    }
                }
            }
            if positive > 1 {
                return Err(Error::InvalidField(format!(
                    "{positive} components positive at node {i}"
                )));
            }
        }
        let mut field = SegregatedField {
            grid,
            components,
            eigenvalues,
            dirichlet,
            normalized: false,
            sampler: OnceLock::new(),
        };
        field.normalized = field.l2_norms().iter().all(|q| (q - 1.0).abs() <= 1e-8);
        Ok(field)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn is_dirichlet(&self) -> bool {
        self.dirichlet
    }

    pub fn into_parts(self) -> (Grid, Vec<Vec<f64>>, Vec<f64>) {
        (self.grid, self.components, self.eigenvalues)
    }

    /// Per node: 0 where every component vanishes, otherwise 1 + the index of
    /// the positive component.
    pub fn labels(&self) -> Vec<u32> {
        (0..self.grid.len())
            .map(|i| {
                self.components
                    .iter()
                    .position(|c| c[i] > 0.0)
                    .map_or(0, |k| k as u32 + 1)
            })
            .collect()
    }

    /// Cell-volume weighted L² norm of each component over Ω.
    pub fn l2_norms(&self) -> Vec<f64> {
        let w = self.grid.weights();
        self.components
            .iter()
            .map(|c| c.iter().zip(w).map(|(v, w)| w * v * v).sum::<f64>().sqrt())
            .collect()
    }

    fn sampler(&self) -> &Sampler {
        self.sampler.get_or_init(|| {
            let grid = &self.grid;
            let n = grid.len();
            let mut sum = vec![0.0; n];
            for c in &self.components {
                for (s, v) in sum.iter_mut().zip(c) {
                    *s += v;
                }
            }
            let mut grads = Vec::with_capacity((self.components.len() + 1) * grid.dim());
            for values in self.components.iter().chain(std::iter::once(&sum)) {
                for axis in 0..grid.dim() {
                    grads.push(nodal_derivative(grid, values, axis));
                }
            }
            Sampler { sum, grads }
        })
    }

    fn corner_weights(&self, x: &Point) -> Result<(usize, [usize; 8], [f64; 8])> {
        let grid = &self.grid;
        let (base, t) = grid.locate(x).ok_or(Error::OutOfBounds(*x))?;
        let dim = grid.dim();
        let ncorner = 1usize << dim;
        let mut idx = [0usize; 8];
        let mut w = [0.0; 8];
        let b0 = grid.index(base);
        for c in 0..ncorner {
            let mut off = 0;
            let mut wc = 1.0;
            for a in 0..dim {
                if c & (1 << a) != 0 {
                    off += grid.stride(a);
                    wc *= t[a];
                } else {
                    wc *= 1.0 - t[a];
                }
            }
            idx[c] = b0 + off;
            w[c] = wc;
        }
        Ok((ncorner, idx, w))
    }

    /// Multilinear interpolation of every component separately (no
    /// projection; the result need not lie on Σ_N).
    pub fn interpolate_components(&self, x: &Point) -> Result<Vec<f64>> {
        let (ncorner, idx, w) = self.corner_weights(x)?;
        Ok(self
            .components
            .iter()
            .map(|c| (0..ncorner).map(|j| w[j] * c[idx[j]]).sum())
            .collect())
    }

    /// Interpolated dominant value and gradient at `x`.
    pub fn sample(&self, x: &Point) -> Result<Sample> {
        let dim = self.grid.dim();
        let (ncorner, idx, w) = self.corner_weights(x)?;
        let interp = |arr: &[f64]| -> f64 { (0..ncorner).map(|c| w[c] * arr[idx[c]]).sum() };

        let sampler = self.sampler();
        let mut best = 0usize;
        let mut best_val = f64::NEG_INFINITY;
        for (k, comp) in self.components.iter().enumerate() {
            let v = interp(comp);
            if v > best_val {
                best_val = v;
                best = k;
            }
        }
        let total = interp(&sampler.sum);
        let signed = 2.0 * best_val - total;
        if signed <= 0.0 {
            return Ok(Sample {
                label: None,
                value: 0.0,
                grad: [0.0; 3],
            });
        }
        let nk = self.components.len();
        let mut grad = [0.0; 3];
        for (a, g) in grad.iter_mut().enumerate().take(dim) {
            *g = 2.0 * interp(&sampler.grads[best * dim + a]) - interp(&sampler.grads[nk * dim + a]);
        }
        Ok(Sample {
            label: Some(best),
            value: signed,
            grad,
        })
    }

    /// Interpolated field value at `x`, a point of Σ_N.
    pub fn eval(&self, x: &Point) -> Result<Vec<f64>> {
        let s = self.sample(x)?;
        let mut y = vec![0.0; self.n_components()];
        if let Some(k) = s.label {
            y[k] = s.value;
        }
        Ok(project_to_sigma(&y))
    }

    /// Rescales `B_ρ(x)` onto a unit-ball grid with `resolution` cells per unit
    /// radius, normalized to unit average L² on B_1. Eigenvalues scale by ρ².
    pub fn blowup(&self, x: &Point, rho: f64, resolution: usize) -> Result<SegregatedField> {
        let h = self.grid.spacing();
        if rho < 4.0 * h * (1.0 - 1e-12) {
            return Err(Error::BelowResolution {
                radius: rho,
                floor: 4.0 * h,
            });
        }
        let margin = self.grid.domain().signed_distance(x);
        if rho > margin + 1e-12 {
            return Err(Error::BallNotContained {
                center: *x,
                radius: rho,
                margin,
            });
        }
        if resolution < 4 {
            return Err(Error::arg("resolution", "need at least 4 cells per radius"));
        }
        let dim = self.dim();
        let unit = crate::grid::Domain::Ball {
            center: vec![0.0; dim],
            radius: 1.0,
        };
        let out_grid = Grid::from_domain(unit, 1.0 / resolution as f64)?;
        let mut comps = vec![vec![0.0; out_grid.len()]; self.n_components()];
        for i in 0..out_grid.len() {
            if !out_grid.domain_mask()[i] {
                continue;
            }
            let y = out_grid.coords(i);
            let p = [x[0] + rho * y[0], x[1] + rho * y[1], x[2] + rho * y[2]];
            let s = self.sample(&p)?;
            if let Some(k) = s.label {
                comps[k][i] = s.value;
            }
        }
        let w = out_grid.weights();
        let mass: f64 = comps
            .iter()
            .map(|c| c.iter().zip(w).map(|(v, w)| w * v * v).sum::<f64>())
            .sum();
        let vol: f64 = w.iter().sum();
        if mass <= 0.0 {
            return Err(Error::Degenerate(format!(
                "field vanishes on B({rho}, {x:?})"
            )));
        }
        let scale = (vol / mass).sqrt();
        for c in &mut comps {
            for v in c.iter_mut() {
                *v *= scale;
            }
        }
        let eig = self.eigenvalues.iter().map(|l| l * rho * rho).collect();
        SegregatedField::new(out_grid, comps, eig, false)
    }
}

/// Centered difference along `axis`, one-sided at grid edges.
fn nodal_derivative(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let h = grid.spacing();
    let stride = grid.stride(axis);
    let n_axis = grid.shape3()[axis];
    (0..grid.len())
        .map(|i| {
            let m = grid.multi_index(i)[axis];
            if n_axis < 2 {
                0.0
            } else if m == 0 {
                (values[i + stride] - values[i]) / h
            } else if m + 1 == n_axis {
                (values[i] - values[i - stride]) / h
            } else {
                (values[i + stride] - values[i - stride]) / (2.0 * h)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_sigma(&[0.5, 0.3, 0.0]), vec![0.5, 0.0, 0.0]);
        assert_eq!(project_to_sigma(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(project_to_sigma(&[-0.2, 0.1]), vec![0.0, 0.1]);
        assert_eq!(project_to_sigma(&[0.4, 0.4]), vec![0.4, 0.0]);
    }

    #[test]
    fn rejects_overlapping_supports() {
        let g = Grid::from_domain(Domain::unit_square(), 0.25).unwrap();
        let mut a = vec![0.0; g.len()];
        let mut b = vec![0.0; g.len()];
        a[12] = 1.0;
        b[12] = 1.0;
        let err = SegregatedField::new(g, vec![a, b], vec![0.0, 0.0], true);
        assert!(matches!(err, Err(Error::InvalidField(_))));
    }

    #[test]
    fn midpoint_between_support_and_zero_is_on_sigma() {
        let g = Grid::from_domain(Domain::unit_square(), 0.25).unwrap();
        let mut a = vec![0.0; g.len()];
        let mut b = vec![0.0; g.len()];
        a[g.index([1, 1, 0])] = 1.0;
        b[g.index([3, 1, 0])] = 1.0;
        let f = SegregatedField::new(g, vec![a, b], vec![0.0, 0.0], true).unwrap();
        for x in [[0.375, 0.25, 0.0], [0.5, 0.25, 0.0], [0.6, 0.3, 0.0]] {
            let y = f.eval(&x).unwrap();
            assert!(y.iter().filter(|&&v| v > 0.0).count() <= 1);
            assert!(y.iter().all(|&v| v >= 0.0));
        }
        assert_eq!(f.eval(&[0.25, 0.25, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(f.eval(&[1.5, 0.0, 0.0]).is_err());
    }
}
