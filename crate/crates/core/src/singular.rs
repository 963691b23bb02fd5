//! Interface extraction, junction detection and classification by the
//! frequency gap.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SegregatedField;
use crate::frequency::{classical_frequency, fit_exponential_constant, smoothed_frequency};
use crate::grid::{dist, Grid, Point};
use crate::quadrature::sphere_rule;

/// Lower bound δ_n of the frequency gap above walls (n = 2, 3).
pub const FREQUENCY_GAP: f64 = 0.5;
/// Junction threshold on the vanishing order, 1 + δ_n/2.
pub const ORDER_THRESHOLD: f64 = 1.0 + FREQUENCY_GAP / 2.0;
/// Half-width τ of the wall band [1 − τ, 1 + τ].
pub const WALL_BAND: f64 = 0.25;
/// Label-count radius in cells.
pub const LABEL_RADIUS_CELLS: f64 = 8.0;
/// Required distance to ∂Ω, in cells, for order estimates.
pub const MARGIN_CELLS: f64 = 16.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceCell {
    /// Lower-corner multi-index.
    pub base: [usize; 3],
    pub center: Point,
    /// Distinct node labels at the corners: 0 for a zero node, k + 1 for
    /// component k.
    pub labels: Vec<u32>,
}

impl InterfaceCell {
    /// Component indices among the corner labels.
    pub fn components(&self) -> Vec<usize> {
        self.labels
            .iter()
            .filter(|&&l| l > 0)
            .map(|&l| l as usize - 1)
            .collect()
    }
}

/// Cells fully inside the domain whose corners carry at least two distinct
/// labels.
pub fn extract_interface(u: &SegregatedField) -> Vec<InterfaceCell> {
    let grid = u.grid();
    let labels = u.labels();
    let mask = grid.domain_mask();
    let cs = grid.cell_shape();
    let h = grid.spacing();
    let dim = grid.dim();
    let mut out = Vec::new();
    for i0 in 0..cs[0] {
        for i1 in 0..cs[1] {
            for i2 in 0..cs[2] {
                let base = [i0, i1, i2];
                let corners = grid.cell_corners(base);
                if !corners.iter().all(|&c| mask[c]) {
                    continue;
                }
                let mut ls: Vec<u32> = corners.iter().map(|&c| labels[c]).collect();
                ls.sort_unstable();
                ls.dedup();
                if ls.len() < 2 {
                    continue;
                }
                let o = grid.origin();
                let mut center = [0.0; 3];
                for a in 0..dim {
                    center[a] = o[a] + (base[a] as f64 + 0.5) * h;
                }
                out.push(InterfaceCell {
                    base,
                    center,
                    labels: ls,
                });
            }
        }
    }
    out
}

/// Node count per component over the domain nodes within `radius` of `x`.
pub fn label_counts(grid: &Grid, labels: &[u32], x: &Point, radius: f64) -> BTreeMap<usize, usize> {
    let h = grid.spacing();
    let o = grid.origin();
    let shape = grid.shape3();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..grid.dim() {
        let l = ((x[a] - radius - o[a]) / h).ceil().max(0.0);
        let u = ((x[a] + radius - o[a]) / h).floor();
        if u < 0.0 || l > (shape[a] - 1) as f64 {
            return BTreeMap::new();
        }
        lo[a] = l as usize;
        hi[a] = (u as usize).min(shape[a] - 1);
    }
    let mut counts = BTreeMap::new();
    for i0 in lo[0]..=hi[0] {
        for i1 in lo[1]..=hi[1] {
            for i2 in lo[2]..=hi[2] {
                let i = grid.index([i0, i1, i2]);
                if !grid.domain_mask()[i] || labels[i] == 0 {
                    continue;
                }
                if dist(&grid.coords(i), x) <= radius {
                    *counts.entry(labels[i] as usize - 1).or_insert(0) += 1;
                }
            }
        }
    }
    counts
}

#[derive(Clone, Debug, PartialEq)]
struct Candidate {
    center: Point,
    weight: f64,
}

fn candidates(u: &SegregatedField, cells: &[InterfaceCell], r: f64) -> Vec<Candidate> {
    let labels = u.labels();
    let grid = u.grid();
    cells
        .par_iter()
        .filter_map(|c| {
            let counts = label_counts(grid, &labels, &c.center, r);
            if counts.len() < 3 {
                return None;
            }
            let mut n: Vec<usize> = counts.values().copied().collect();
            n.sort_unstable_by(|a, b| b.cmp(a));
            Some(Candidate {
                center: c.center,
                weight: n[2] as f64,
            })
        })
        .collect()
}

/// Greedy clustering: the heaviest unassigned candidate absorbs every
/// unassigned candidate within `radius`; the representative is the
/// weighted centroid of the absorbed set.
fn cluster(mut cands: Vec<Candidate>, radius: f64) -> Vec<Point> {
    cands.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then(a.center[0].total_cmp(&b.center[0]))
            .then(a.center[1].total_cmp(&b.center[1]))
            .then(a.center[2].total_cmp(&b.center[2]))
    });
    let mut taken = vec![false; cands.len()];
    let mut reps = Vec::new();
    for i in 0..cands.len() {
        if taken[i] {
            continue;
        }
        let seed = cands[i].center;
        let mut acc = [0.0; 3];
        let mut wsum = 0.0;
        for (j, c) in cands.iter().enumerate() {
            if !taken[j] && dist(&c.center, &seed) <= radius {
                taken[j] = true;
                for a in 0..3 {
                    acc[a] += c.weight * c.center[a];
                }
                wsum += c.weight;
            }
        }
        reps.push([acc[0] / wsum, acc[1] / wsum, acc[2] / wsum]);
    }
    reps
}

/// Representatives of interface cells whose `r`-neighborhood meets at least
/// three supports, one per cluster.
pub fn junction_candidates(u: &SegregatedField, r: f64) -> Result<Vec<Point>> {
    let h = u.grid().spacing();
    if r < 2.0 * h * (1.0 - 1e-12) {
        return Err(Error::BelowResolution {
            radius: r,
            floor: 2.0 * h,
        });
    }
    let cells = extract_interface(u);
    let cands = candidates(u, &cells, r);
    Ok(cluster(cands, (2.0 * r).max(3.0 * h)))
}

fn height(u: &SegregatedField, rule: &[(Point, f64)], x: &Point, rho: f64) -> f64 {
    rule.iter()
        .map(|(nu, w)| {
            let y = [x[0] + rho * nu[0], x[1] + rho * nu[1], x[2] + rho * nu[2]];
            u.sample(&y).map_or(f64::INFINITY, |s| w * s.value * s.value)
        })
        .sum()
}

/// Moves a junction estimate to the minimizer of `H(·, 4h)` over a window of
/// ±2h, refined three times by a factor 4.
pub fn snap_junction(u: &SegregatedField, x: &Point) -> Point {
    let h = u.grid().spacing();
    let dim = u.dim();
    let rho = 4.0 * h;
    let count = if dim == 2 { 64 } else { 12 };
    let rule = sphere_rule(dim, count);
    let mut best = *x;
    let mut best_h = height(u, &rule, x, rho);
    let mut step = h / 2.0;
    for _ in 0..3 {
        let center = best;
        let k = 4i32;
        let range = |a: usize| if a < dim { -k..=k } else { 0..=0 };
        for i in range(0) {
            for j in range(1) {
                for l in range(2) {
                    let p = [
                        center[0] + i as f64 * step,
                        center[1] + j as f64 * step,
                        center[2] + l as f64 * step,
                    ];
                    let v = height(u, &rule, &p, rho);
                    if v < best_h {
                        best_h = v;
                        best = p;
                    }
                }
            }
        }
        step /= 4.0;
    }
    best
}

/// Moves a point near a wall between components `a` and `b` onto the zero
/// of `u_a − u_b` along the segment from `pa` (inside a) to `pb` (inside b).
pub fn snap_wall(u: &SegregatedField, pa: &Point, pb: &Point, a: usize, b: usize) -> Result<Point> {
    let w = |p: &Point| -> Result<f64> {
        let v = u.interpolate_components(p)?;
        Ok(v[a] - v[b])
    };
    let mut lo = *pa;
    let mut hi = *pb;
    if w(&lo)? <= 0.0 || w(&hi)? >= 0.0 {
        return Err(Error::Degenerate("segment does not cross the wall".into()));
    }
    for _ in 0..60 {
        let mid = [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ];
        let wm = w(&mid)?;
        if wm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok([
        0.5 * (lo[0] + hi[0]),
        0.5 * (lo[1] + hi[1]),
        0.5 * (lo[2] + hi[2]),
    ])
}

/// Sub-cell points on the walls: one per interface cell meeting at least two
/// supports, on the zero of `u_a − u_b` along a cell edge or diagonal.
/// Cells touching only one support (the Dirichlet boundary) are skipped.
pub fn interface_points(u: &SegregatedField) -> Vec<Point> {
    extract_interface(u)
        .par_iter()
        .filter_map(|cell| {
            let comps = cell.components();
            if comps.len() < 2 {
                return None;
            }
            let (a, b) = (comps[0], comps[1]);
            let p = wall_endpoints(u, cell, a, b)
                .and_then(|(pa, pb)| snap_wall(u, &pa, &pb, a, b).ok())
                .unwrap_or(cell.center);
            Some(p)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub order: f64,
    pub lambda_hat: f64,
    pub radii: Vec<f64>,
    pub frequencies: Vec<f64>,
}

fn check_margin(u: &SegregatedField, x: &Point) -> Result<()> {
    let need = MARGIN_CELLS * u.grid().spacing();
    let margin = u.grid().domain().signed_distance(x);
    if margin < need - 1e-12 {
        return Err(Error::BallNotContained {
            center: *x,
            radius: need,
            margin,
        });
    }
    Ok(())
}

/// `I(x, 0⁺)` from `e^{Λ̂ r²} I(x, r)` at r ∈ {4h, 6h, 8h}, extrapolated
/// linearly in r².
pub fn vanishing_order_estimate(u: &SegregatedField, x: &Point) -> Result<OrderEstimate> {
    check_margin(u, x)?;
    let h = u.grid().spacing();
    let mut radii = Vec::new();
    let mut vals = Vec::new();
    for c in [4.0, 6.0, 8.0] {
        let r = c * h;
        let i = classical_frequency(u, x, r)?;
        if i.is_finite() {
            radii.push(r);
            vals.push(i);
        }
    }
    if radii.is_empty() {
        return Err(Error::VanishingHeight(*x));
    }
    let lambda_hat = fit_exponential_constant(&radii, &vals);
    let ys: Vec<f64> = radii
        .iter()
        .zip(&vals)
        .map(|(r, v)| (lambda_hat * r * r).exp() * v)
        .collect();
    let order = if ys.len() == 1 {
        ys[0]
    } else {
        let xs: Vec<f64> = radii.iter().map(|r| r * r).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        my - sxy / sxx * mx
    };
    Ok(OrderEstimate {
        order,
        lambda_hat,
        radii,
        frequencies: vals,
    })
}

pub fn vanishing_order(u: &SegregatedField, x: &Point) -> Result<f64> {
    Ok(vanishing_order_estimate(u, x)?.order)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Wall,
    Junction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularSample {
    pub location: Point,
    pub classification: Classification,
    pub order: f64,
    /// Components present within the detection radius.
    pub labels: Vec<usize>,
    pub detection_radius: f64,
    /// order ≥ 1 + δ_n/2.
    pub order_signal: bool,
    /// At least three components within the detection radius.
    pub label_signal: bool,
}

impl SingularSample {
    pub fn signals_agree(&self) -> bool {
        self.order_signal == self.label_signal
    }
}

/// Junction when either the order or the label count says so.
pub fn classify_point(u: &SegregatedField, x: &Point) -> Result<SingularSample> {
    let grid = u.grid();
    let radius = LABEL_RADIUS_CELLS * grid.spacing();
    let labels: Vec<usize> = label_counts(grid, &u.labels(), x, radius)
        .into_keys()
        .collect();
    if labels.len() < 2 {
        return Err(Error::arg("x", format!("{x:?} is not on the interface")));
    }
    classify_with_labels(u, x, labels, radius)
}

fn classify_with_labels(
    u: &SegregatedField,
    x: &Point,
    labels: Vec<usize>,
    radius: f64,
) -> Result<SingularSample> {
    let order = vanishing_order(u, x)?;
    let order_signal = order >= ORDER_THRESHOLD;
    let label_signal = labels.len() >= 3;
    let classification = if order_signal || label_signal {
        Classification::Junction
    } else if order >= 1.0 - WALL_BAND {
        Classification::Wall
    } else {
        return Err(Error::Degenerate(format!(
            "order {order:.3} at {x:?} is below the wall band"
        )));
    };
    Ok(SingularSample {
        location: *x,
        classification,
        order,
        labels,
        detection_radius: radius,
        order_signal,
        label_signal,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClearingReport {
    pub center: Point,
    pub radius: f64,
    pub eps: f64,
    pub i_phi: f64,
    /// I_φ(x, r) < eps.
    pub applies: bool,
    /// The extracted interface meets B_{r/16}(x).
    pub interface_hit: bool,
}

impl ClearingReport {
    pub fn holds(&self) -> bool {
        !(self.applies && self.interface_hit)
    }
}

fn interface_meets(u: &SegregatedField, cells: &[InterfaceCell], x: &Point, rho: f64) -> bool {
    let h = u.grid().spacing();
    let dim = u.dim();
    cells.iter().any(|c| {
        let mut d2 = 0.0;
        for a in 0..dim {
            let lo = c.center[a] - 0.5 * h;
            let hi = c.center[a] + 0.5 * h;
            let e = (lo - x[a]).max(x[a] - hi).max(0.0);
            d2 += e * e;
        }
        d2 <= rho * rho
    })
}

/// Small smoothed frequency must leave `B_{r/16}(x)` free of the interface.
pub fn clearing_check(u: &SegregatedField, x: &Point, r: f64, eps: f64) -> Result<ClearingReport> {
    let cells = extract_interface(u);
    clearing_with(u, &cells, x, r, eps)
}

fn clearing_with(
    u: &SegregatedField,
    cells: &[InterfaceCell],
    x: &Point,
    r: f64,
    eps: f64,
) -> Result<ClearingReport> {
    let i_phi = smoothed_frequency(u, x, r)?;
    Ok(ClearingReport {
        center: *x,
        radius: r,
        eps,
        i_phi,
        applies: i_phi < eps,
        interface_hit: interface_meets(u, cells, x, r / 16.0),
    })
}

/// Clearing reports on many points at once, plus the empirical threshold
/// ε̂′: the smallest `I_φ(x, r)` among points whose `B_{r/16}(x)` meets the
/// interface (infinite when none does). Clearing holds for every eps ≤ ε̂′.
pub fn clearing_sweep(
    u: &SegregatedField,
    points: &[Point],
    r: f64,
    eps: f64,
) -> Result<(Vec<ClearingReport>, f64)> {
    let cells = extract_interface(u);
    let reports = points
        .par_iter()
        .map(|p| clearing_with(u, &cells, p, r, eps))
        .collect::<Result<Vec<_>>>()?;
    let threshold = reports
        .iter()
        .filter(|r| r.interface_hit && r.i_phi.is_finite())
        .map(|r| r.i_phi)
        .fold(f64::INFINITY, f64::min);
    Ok((reports, threshold))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    /// Neighborhood radius for junction candidates, in cells.
    pub candidate_radius_cells: f64,
    /// Minimum spacing of wall samples, in cells.
    pub wall_spacing_cells: f64,
    /// Wall samples need exactly two components within this many cells.
    pub wall_clearance_cells: f64,
    pub max_wall_samples: usize,
    pub snap: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            candidate_radius_cells: 4.0,
            wall_spacing_cells: 12.0,
            wall_clearance_cells: 16.0,
            max_wall_samples: 64,
            snap: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub samples: Vec<SingularSample>,
    pub interface_cells: usize,
    /// Junction candidates found before the margin filter.
    pub junction_candidates: usize,
    /// Candidates dropped for lying within the boundary margin.
    pub excluded_near_boundary: usize,
}

impl Detection {
    pub fn junctions(&self) -> impl Iterator<Item = &SingularSample> {
        self.samples
            .iter()
            .filter(|s| s.classification == Classification::Junction)
    }

    pub fn walls(&self) -> impl Iterator<Item = &SingularSample> {
        self.samples
            .iter()
            .filter(|s| s.classification == Classification::Wall)
    }

    /// Fraction of samples on which the order and label detectors agree.
    pub fn agreement(&self) -> f64 {
        if self.samples.is_empty() {
            return 1.0;
        }
        let ok = self.samples.iter().filter(|s| s.signals_agree()).count();
        ok as f64 / self.samples.len() as f64
    }
}

fn wall_endpoints(u: &SegregatedField, cell: &InterfaceCell, a: usize, b: usize) -> Option<(Point, Point)> {
    let grid = u.grid();
    let labels = u.labels();
    let corners = grid.cell_corners(cell.base);
    let pa = corners.iter().find(|&&c| labels[c] as usize == a + 1)?;
    let pb = corners.iter().find(|&&c| labels[c] as usize == b + 1)?;
    Some((grid.coords(*pa), grid.coords(*pb)))
}

/// Junction representatives plus well-separated wall points, each classified
/// by both detectors. Points closer than 16h to ∂Ω are excluded.
pub fn detect(u: &SegregatedField, cfg: &DetectConfig) -> Result<Detection> {
    let grid = u.grid();
    let h = grid.spacing();
    let labels = u.labels();
    let cells = extract_interface(u);
    let r = cfg.candidate_radius_cells * h;
    let reps = cluster(candidates(u, &cells, r), (2.0 * r).max(3.0 * h));
    let margin = MARGIN_CELLS * h;
    let inside = |p: &Point| grid.domain().signed_distance(p) >= margin;
    let n_cand = reps.len();
    let reps: Vec<Point> = reps.into_iter().filter(|p| inside(p)).collect();
    let excluded = n_cand - reps.len();

    let label_radius = LABEL_RADIUS_CELLS * h;
    let mut points: Vec<(Point, Vec<usize>)> = reps
        .par_iter()
        .map(|p| {
            let q = if cfg.snap { snap_junction(u, p) } else { *p };
            let q = if inside(&q) { q } else { *p };
            let ls = label_counts(grid, &labels, &q, label_radius).into_keys().collect();
            (q, ls)
        })
        .collect();

    let clearance = cfg.wall_clearance_cells * h;
    let spacing = cfg.wall_spacing_cells * h;
    let mut walls: Vec<Point> = Vec::new();
    for cell in &cells {
        if walls.len() >= cfg.max_wall_samples {
            break;
        }
        let comps = cell.components();
        if comps.len() != 2 || !inside(&cell.center) {
            continue;
        }
        if walls.iter().any(|w| dist(w, &cell.center) < spacing) {
            continue;
        }
        if label_counts(grid, &labels, &cell.center, clearance).len() != 2 {
            continue;
        }
        let p = if cfg.snap {
            let Some((pa, pb)) = wall_endpoints(u, cell, comps[0], comps[1]) else {
                continue;
            };
            match snap_wall(u, &pa, &pb, comps[0], comps[1]) {
                Ok(p) => p,
                Err(_) => cell.center,
            }
        } else {
            cell.center
        };
        if inside(&p) {
            walls.push(p);
        }
    }
    points.extend(walls.into_iter().map(|p| {
        let ls = label_counts(grid, &labels, &p, label_radius).into_keys().collect();
        (p, ls)
    }));

    let samples = points
        .into_par_iter()
        .map(|(p, ls)| classify_with_labels(u, &p, ls, label_radius))
        .collect::<Result<Vec<_>>>()?;
    Ok(Detection {
        samples,
        interface_cells: cells.len(),
        junction_candidates: n_cand,
        excluded_near_boundary: excluded,
    })
}
