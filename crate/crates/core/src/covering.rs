//! Tube volumes and Minkowski slopes, the frequency-drop covering, and the
//! Reifenberg-type flatness integrals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SegregatedField;
use crate::flatness::{mean_flatness, PointMeasure};
use crate::frequency::{check_admissible, pinching, smoothed_frequency};
use crate::grid::{dist, Grid, Point};

/// Region K intersected with the tubes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// The whole domain.
    Domain,
    Ball { center: Point, radius: f64 },
}

impl Region {
    fn contains(&self, grid: &Grid, p: &Point) -> bool {
        grid.domain().signed_distance(p) >= 0.0
            && match self {
                Region::Domain => true,
                Region::Ball { center, radius } => dist(p, center) <= *radius,
            }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiCurve {
    pub rhos: Vec<f64>,
    pub volumes: Vec<f64>,
    /// Log-log fit; absent with fewer than 5 radii or a degenerate curve.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Half-width of the 95% interval of the slope.
    pub confidence: Option<f64>,
}

impl MinkowskiCurve {
    pub fn csv_rows(&self) -> Vec<[String; 2]> {
        self.rhos
            .iter()
            .zip(&self.volumes)
            .map(|(r, v)| [format!("{r:.12e}"), format!("{v:.12e}")])
            .collect()
    }
}

/// `count` radii doubling from `rho_min`, the last one clipped to `rho_max`.
pub fn dyadic_rhos(rho_min: f64, rho_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = rho_min;
    while r < rho_max * (1.0 - 1e-12) {
        out.push(r);
        r *= 2.0;
    }
    out.push(rho_max);
    out
}

fn cell_centers(grid: &Grid) -> impl Iterator<Item = ([usize; 3], Point)> + '_ {
    let cs = grid.cell_shape();
    let h = grid.spacing();
    let o = grid.origin();
    let dim = grid.dim();
    (0..cs[0]).flat_map(move |i| {
        (0..cs[1]).flat_map(move |j| {
            (0..cs[2]).map(move |k| {
                let m = [i, j, k];
                let mut c = [0.0; 3];
                for a in 0..dim {
                    c[a] = o[a] + (m[a] as f64 + 0.5) * h;
                }
                (m, c)
            })
        })
    })
}

/// `𝓛ⁿ(B_ρ(S) ∩ K)` by counting grid cells whose centers lie within ρ of S,
/// with the log-log fit attached.
pub fn tube_volume_curve(grid: &Grid, set: &[Point], region: &Region, rhos: &[f64]) -> Result<MinkowskiCurve> {
    if set.is_empty() {
        return Err(Error::arg("set", "empty point set"));
    }
    let h = grid.spacing();
    if let Some(r) = rhos.iter().find(|&&r| r < h * (1.0 - 1e-12)) {
        return Err(Error::BelowResolution { radius: *r, floor: h });
    }
    let rmax = rhos.iter().copied().fold(0.0, f64::max);
    let cs = grid.cell_shape();
    let dim = grid.dim();
    let o = grid.origin();
    let ncell = cs[0] * cs[1] * cs[2];
    let cell_index = |m: [usize; 3]| (m[0] * cs[1] + m[1]) * cs[2] + m[2];
    let mut dmin = vec![f64::INFINITY; ncell];
    for p in set {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut empty = false;
        for a in 0..dim {
            let l = ((p[a] - rmax - o[a]) / h - 0.5).floor().max(0.0);
            let u = ((p[a] + rmax - o[a]) / h - 0.5).ceil();
            if u < 0.0 || l as usize >= cs[a] {
                empty = true;
                break;
            }
            lo[a] = l as usize;
            hi[a] = (u as usize).min(cs[a] - 1);
        }
        if empty {
            continue;
        }
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    let m = [i, j, k];
                    let mut c = [0.0; 3];
                    for a in 0..dim {
                        c[a] = o[a] + (m[a] as f64 + 0.5) * h;
                    }
                    let d = dist(&c, p);
                    let slot = &mut dmin[cell_index(m)];
                    if d < *slot {
                        *slot = d;
                    }
                }
            }
        }
    }
    let inside: Vec<f64> = cell_centers(grid)
        .filter(|(_, c)| region.contains(grid, c))
        .map(|(m, _)| dmin[cell_index(m)])
        .filter(|d| d.is_finite())
        .collect();
    let vol = grid.cell_volume();
    let volumes: Vec<f64> = rhos
        .iter()
        .map(|&r| inside.iter().filter(|&&d| d <= r).count() as f64 * vol)
        .collect();
    let mut curve = MinkowskiCurve {
        rhos: rhos.to_vec(),
        volumes,
        slope: None,
        intercept: None,
        confidence: None,
    };
    if let Ok((s, c, b)) = fit_line(&curve) {
        curve.slope = Some(s);
        curve.confidence = Some(c);
        curve.intercept = Some(b);
    }
    Ok(curve)
}

fn fit_line(curve: &MinkowskiCurve) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = curve
        .rhos
        .iter()
        .zip(&curve.volumes)
        .filter(|(r, v)| **r > 0.0 && **v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::Degenerate(format!("{} positive samples, need 5", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("constant data".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    Ok((slope, 1.96 * se, intercept))
}

/// Least-squares log-log slope and the half-width of its 95% interval.
pub fn fit_scaling_exponent(curve: &MinkowskiCurve) -> Result<(f64, f64)> {
    fit_line(curve).map(|(s, c, _)| (s, c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Reached the terminal scale s.
    TerminalScale,
    /// Sup frequency dropped to U − δ.
    FrequencyDrop,
    /// Ball budget exhausted before either condition.
    Budget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverBall {
    pub center: Point,
    pub radius: f64,
    pub reason: StopReason,
    /// Sup of `I_φ^{c}` over the covered points at this radius, when resolvable.
    pub sup_frequency: Option<f64>,
    pub generation: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverConfig {
    /// Starting radius r.
    pub radius: f64,
    /// Terminal scale s.
    pub terminal: f64,
    pub delta: f64,
    /// The monotonicity constant A; the additive term is c(A) = 3 + A + A².
    pub additive: f64,
    /// Radius ratio between generations.
    pub rho: f64,
    pub max_balls: usize,
}

impl Default for CoverConfig {
    fn default() -> Self {
        CoverConfig {
            radius: 0.25,
            terminal: 0.01,
            delta: 0.1,
            additive: 0.0,
            rho: 0.5,
            max_balls: 10_000,
        }
    }
}

impl CoverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.terminal > 0.0 && self.terminal < self.radius) {
            return Err(Error::arg("terminal", "need 0 < s < r"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::arg("delta", "must be positive"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::arg("rho", "must lie in (0, 1)"));
        }
        if self.max_balls == 0 {
            return Err(Error::arg("max_balls", "must be positive"));
        }
        Ok(())
    }

    pub fn additive_constant(&self) -> f64 {
        3.0 + self.additive + self.additive * self.additive
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Covering {
    pub balls: Vec<CoverBall>,
    pub upper_bound: f64,
    pub delta: f64,
    pub additive_constant: f64,
    pub dim: usize,
    pub generations: usize,
    pub budget_exceeded: bool,
    /// Radii at which the frequency could not be evaluated, so the drop
    /// test was skipped.
    pub unresolved_generations: Vec<f64>,
}

impl Covering {
    /// Σ s_i^{n−2}.
    pub fn packing_sum(&self) -> f64 {
        self.balls
            .iter()
            .map(|b| b.radius.powi(self.dim as i32 - 2))
            .sum()
    }

    pub fn covers(&self, points: &[Point]) -> bool {
        points
            .iter()
            .all(|p| self.balls.iter().any(|b| dist(p, &b.center) <= b.radius))
    }

    /// Pairwise disjointness of the 1/5-shrunk balls.
    pub fn vitali_disjoint(&self) -> bool {
        let b = &self.balls;
        (0..b.len()).all(|i| {
            (i + 1..b.len()).all(|j| dist(&b[i].center, &b[j].center) >= (b[i].radius + b[j].radius) / 5.0)
        })
    }
}

fn corrected_frequency(u: &SegregatedField, y: &Point, t: f64, c: f64) -> Option<f64> {
    check_admissible(u, y, t).ok()?;
    smoothed_frequency(u, y, t).ok().filter(|v| v.is_finite()).map(|v| v + c * t * t)
}

/// Covers `points` by balls that either reach the terminal scale or see the
/// sup of `I_φ^{c(A)}` fall to `U − δ`, refining by `rho` per generation.
pub fn inductive_cover(u: &SegregatedField, points: &[Point], cfg: &CoverConfig) -> Result<Covering> {
    cfg.validate()?;
    let c = cfg.additive_constant();
    let upper = points
        .par_iter()
        .filter_map(|p| corrected_frequency(u, p, cfg.radius, c))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let upper = if upper.is_finite() { upper } else { f64::INFINITY };
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (&points[a], &points[b]);
        p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])).then(p[2].total_cmp(&q[2]))
    });
    let mut pending: Vec<Point> = order.into_iter().map(|i| points[i]).collect();
    let mut balls: Vec<CoverBall> = Vec::new();
    let mut radius = cfg.radius;
    let mut generation = 0;
    let mut budget_exceeded = false;
    let mut unresolved = Vec::new();
    while !pending.is_empty() {
        let terminal = radius <= cfg.terminal * (1.0 + 1e-12);
        let mut centers: Vec<Point> = Vec::new();
        let mut members: Vec<Vec<Point>> = Vec::new();
        for p in &pending {
            if balls.iter().any(|b| dist(p, &b.center) <= b.radius) {
                continue;
            }
            match centers.iter().position(|c| dist(p, c) <= radius) {
                Some(i) => members[i].push(*p),
                None => {
                    centers.push(*p);
                    members.push(vec![*p]);
                }
            }
        }
        let over_budget = balls.len() + centers.len() > cfg.max_balls;
        let sups: Vec<Option<f64>> = if terminal || over_budget {
            vec![None; centers.len()]
        } else {
            centers
                .par_iter()
                .map(|ctr| {
                    let inside: Vec<&Point> = points.iter().filter(|y| dist(y, ctr) <= radius).collect();
                    let vals: Vec<Option<f64>> = inside.iter().map(|y| corrected_frequency(u, y, radius, c)).collect();
                    if vals.iter().any(|v| v.is_none()) {
                        None
                    } else {
                        vals.into_iter().flatten().reduce(f64::max)
                    }
                })
                .collect()
        };
        if !terminal && !over_budget && sups.iter().any(|s| s.is_none()) {
            log::warn!("frequency unresolved at radius {radius:.4e}; drop test skipped");
            unresolved.push(radius);
        }
        let mut next = Vec::new();
        for ((ctr, mem), sup) in centers.into_iter().zip(members).zip(sups) {
            let reason = if over_budget {
                Some(StopReason::Budget)
            } else if terminal {
                Some(StopReason::TerminalScale)
            } else if sup.is_some_and(|v| v <= upper - cfg.delta) {
                Some(StopReason::FrequencyDrop)
            } else {
                None
            };
            match reason {
                Some(reason) => balls.push(CoverBall {
                    center: ctr,
                    radius,
                    reason,
                    sup_frequency: sup,
                    generation,
                }),
                None => next.extend(mem),
            }
        }
        if over_budget {
            budget_exceeded = true;
            break;
        }
        pending = next;
        radius = (radius * cfg.rho).max(cfg.terminal);
        generation += 1;
    }
    Ok(Covering {
        balls,
        upper_bound: upper,
        delta: cfg.delta,
        additive_constant: c,
        dim: u.dim(),
        generations: generation + 1,
        budget_exceeded,
        unresolved_generations: unresolved,
    })
}

/// `∫_{B_t(x)} ∫_{s_min}^t D_μ^k(z, s) ds/s dμ(z)`, with `s_min` a quarter
/// of the smallest inter-atom distance. The scale range is cut at `nodes`
/// log-spaced points and at every atom distance from z; on each piece the
/// in-ball configuration is fixed, so `D_μ^k(z, s) = T s^{−k−2}` and the
/// piece integrates in closed form.
pub fn reifenberg_integral_with(mu: &PointMeasure, x: &Point, t: f64, k: usize, nodes: usize) -> Result<f64> {
    if k > 1 {
        return Err(Error::arg("k", format!("{k} not in 0..=1")));
    }
    if !(t > 0.0) {
        return Err(Error::arg("t", "must be positive"));
    }
    if nodes < 2 {
        return Err(Error::arg("nodes", "need at least 2"));
    }
    let atoms = mu.atoms();
    let mut sep = f64::INFINITY;
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            let d = dist(&atoms[i].point, &atoms[j].point);
            if d > 0.0 {
                sep = sep.min(d);
            }
        }
    }
    if !sep.is_finite() {
        return Ok(0.0);
    }
    let s_min = sep / 4.0;
    if s_min >= t {
        return Ok(0.0);
    }
    let (a, b) = (s_min.ln(), t.ln());
    let step = (b - a) / (nodes - 1) as f64;
    let grid: Vec<f64> = (0..nodes).map(|i| (a + step * i as f64).exp()).collect();
    let p = k as i32 + 2;
    let mut total = 0.0;
    for z in mu.in_ball(x, t) {
        if z.weight == 0.0 {
            continue;
        }
        let mut cuts = grid.clone();
        cuts.extend(
            atoms
                .iter()
                .map(|y| dist(&y.point, &z.point))
                .filter(|&d| d > s_min && d < t),
        );
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut inner = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let tail = mean_flatness(mu, &z.point, mid, k)?.flatness * mid.powi(p);
            inner += tail * (lo.powi(-p) - hi.powi(-p)) / p as f64;
        }
        total += z.weight * inner;
    }
    Ok(total)
}

/// [`reifenberg_integral_with`] on 20 nodes.
pub fn reifenberg_integral(mu: &PointMeasure, x: &Point, t: f64, k: usize) -> Result<f64> {
    reifenberg_integral_with(mu, x, t, k, 20)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JonesReport {
    pub center: Point,
    pub radius: f64,
    pub outer_factor: f64,
    /// D_μ^{n−2}(x, r).
    pub flatness: f64,
    /// r^{2−n} ∫_{B_r(x)} W^{3+A+A²}_{r, outer·r} dμ.
    pub pinching_integral: f64,
    /// flatness / pinching_integral; None for 0/0.
    pub ratio: Option<f64>,
    pub zero_over_zero: bool,
}

/// Empirical constant relating mean flatness to integrated pinching.
pub fn jones_bound_report(
    u: &SegregatedField,
    mu: &PointMeasure,
    x: &Point,
    r: f64,
    additive: f64,
    outer_factor: f64,
) -> Result<JonesReport> {
    let n = u.dim();
    if mu.dim() != n {
        return Err(Error::arg("mu", "dimension differs from the field"));
    }
    if !(outer_factor > 1.0) {
        return Err(Error::arg("outer_factor", "must exceed 1"));
    }
    let c = 3.0 + additive + additive * additive;
    let flat = mean_flatness(mu, x, r, n - 2)?.flatness;
    let atoms: Vec<_> = mu.in_ball(x, r).copied().collect();
    let w = atoms
        .par_iter()
        .map(|a| pinching(u, &a.point, r, outer_factor * r, c).map(|v| a.weight * v))
        .collect::<Result<Vec<_>>>()?;
    let integral = w.iter().sum::<f64>() / r.powi(n as i32 - 2);
    let zero_over_zero = flat.abs() < 1e-14 && integral.abs() < 1e-14;
    let ratio = if zero_over_zero || integral == 0.0 {
        None
    } else {
        Some(flat / integral)
    };
    Ok(JonesReport {
        center: *x,
        radius: r,
        outer_factor,
        flatness: flat,
        pinching_integral: integral,
        ratio,
        zero_over_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;
    use crate::oracle::{make_oracle, OracleSpec};
    use std::f64::consts::PI;

    #[test]
    fn point_tube_is_a_disk() {
        let g = Grid::from_domain(Domain::rectangle(&[-1.0, -1.0], &[1.0, 1.0]), 1.0 / 128.0).unwrap();
        let rhos = dyadic_rhos(2.0 / 128.0, 0.5);
        let c = tube_volume_curve(&g, &[[0.0; 3]], &Region::Domain, &rhos).unwrap();
        for (r, v) in c.rhos.iter().zip(&c.volumes) {
            assert!((v - PI * r * r).abs() < 4.0 * r / 128.0 + 1e-3 * r * r, "{r} {v}");
        }
        let slope = c.slope.unwrap();
        assert!((slope - 2.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn exact_power_laws() {
        let rhos: Vec<f64> = (0..6).map(|i| 0.01 * 2f64.powi(i)).collect();
        let mk = |p: i32| MinkowskiCurve {
            volumes: rhos.iter().map(|r| r.powi(p)).collect(),
            rhos: rhos.clone(),
            slope: None,
            intercept: None,
            confidence: None,
        };
        assert!((fit_scaling_exponent(&mk(2)).unwrap().0 - 2.0).abs() < 1e-12);
        assert!((fit_scaling_exponent(&mk(1)).unwrap().0 - 1.0).abs() < 1e-12);
        assert!(fit_scaling_exponent(&mk(0)).is_err());
    }

    #[test]
    fn single_point_cover_and_oracle_junction() {
        let g = Grid::from_domain(Domain::rectangle(&[-0.5, -0.5], &[0.5, 0.5]), 1.0 / 128.0).unwrap();
        let u = make_oracle(&g, &OracleSpec::new(3, [0.0; 3])).unwrap();
        let cfg = CoverConfig {
            radius: 0.1,
            terminal: 0.01,
            delta: 0.1,
            ..Default::default()
        };
        let cov = inductive_cover(&u, &[[0.0; 3]], &cfg).unwrap();
        assert_eq!(cov.balls.len(), 1);
        assert_eq!(cov.balls[0].reason, StopReason::TerminalScale);
        assert!((cov.balls[0].radius - 0.01).abs() < 1e-15);
        let pts: Vec<Point> = (0..5).map(|i| [0.002 * i as f64, 0.0, 0.0]).collect();
        let cov = inductive_cover(&u, &pts, &cfg).unwrap();
        assert!(cov.covers(&pts) && cov.vitali_disjoint());
        assert!(cov.balls.iter().all(|b| b.reason == StopReason::TerminalScale));
    }

    #[test]
    fn reifenberg_trivial_cases() {
        let one = PointMeasure::unit_masses(2, &[[0.1, 0.2, 0.0]]).unwrap();
        assert_eq!(reifenberg_integral(&one, &[0.0; 3], 1.0, 1).unwrap(), 0.0);
        let line: Vec<Point> = (0..7).map(|i| [0.1 * i as f64, 0.05 * i as f64, 0.0]).collect();
        let mu = PointMeasure::unit_masses(2, &line).unwrap();
        assert!(reifenberg_integral(&mu, &[0.3, 0.15, 0.0], 1.0, 1).unwrap().abs() < 1e-10);
    }
}
