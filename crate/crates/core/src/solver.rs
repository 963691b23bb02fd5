//! Optimal-partition solver.
//!
//! The discrete energy of a labeled nonnegative field charges `(v_i − v_j)²`
//! on edges inside one support, `(v_i + v_j)²` on edges between two supports
//! (the signed function crosses zero inside the edge) and `v_i²` on edges into
//! the zero set. Each node update is the projection onto Σ_N of the local
//! solve; sweeps are red-black SOR, and every accepted step lowers Σ λ_k.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SegregatedField;
use crate::grid::{dist, Domain, Grid, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedLayout {
    /// Voronoi cells of well-spread random seeds with tent profiles.
    Voronoi,
    /// Independent random label and value per node.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub components: usize,
    pub domain: Domain,
    pub spacing: f64,
    pub layout: SeedLayout,
    pub seed: u64,
    /// Cap on outer steps per level.
    pub max_iters: usize,
    /// Relaxation scale in (0, 1]; multiplies the SOR factor.
    pub damping: f64,
    /// Relative change of Σ λ_k over 10 accepted steps that counts as converged.
    pub tolerance: f64,
    /// Sweeps per step; labels are frozen on all but the last sweep.
    pub projection_cadence: usize,
    /// Minimum cells across the smallest extent on the coarsest level.
    pub coarsest_cells: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            components: 3,
            domain: Domain::unit_disk(),
            spacing: 1.0 / 128.0,
            layout: SeedLayout::Voronoi,
            seed: 0,
            max_iters: 4000,
            damping: 1.0,
            tolerance: 1e-11,
            projection_cadence: 2,
            coarsest_cells: 32,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::arg("components", "N must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::arg("damping", format!("{} not in (0, 1]", self.damping)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::arg("tolerance", "must be positive"));
        }
        if self.projection_cadence == 0 {
            return Err(Error::arg("projection_cadence", "must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::arg("max_iters", "must be at least 1"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::arg("spacing", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub spacing: f64,
    pub steps: usize,
    pub rejected: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Outer steps over all levels, accepted or not.
    pub iterations: usize,
    /// Σ λ_k after each accepted step on the finest level.
    pub objective_history: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub objective: f64,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub rejected_steps: usize,
    pub levels: Vec<LevelReport>,
    pub wall_seconds: f64,
}

struct Level {
    grid: Grid,
    dim: usize,
    h: f64,
    // Interior neighbors per node; NONE marks a neighbor pinned at zero.
    nbrs: Vec<[u32; 6]>,
    colors: [Vec<u32>; 2],
}

const NONE: u32 = u32::MAX;

impl Level {
    fn new(grid: Grid) -> Self {
        let dim = grid.dim();
        let n = grid.len();
        let mut nbrs = vec![[NONE; 6]; n];
        let mut colors = [Vec::new(), Vec::new()];
        for i in 0..n {
            if !grid.is_interior(i) {
                continue;
            }
            for (slot, nb) in grid.axis_neighbors(i).into_iter().enumerate() {
                if let Some(j) = nb {
                    if grid.is_interior(j) {
                        nbrs[i][slot] = j as u32;
                    }
                }
            }
            let m = grid.multi_index(i);
            colors[(m[0] + m[1] + m[2]) % 2].push(i as u32);
        }
        Level {
            h: grid.spacing(),
            grid,
            dim,
            nbrs,
            colors,
        }
    }

    fn interior_count(&self) -> usize {
        self.colors[0].len() + self.colors[1].len()
    }
}

#[derive(Clone)]
struct State {
    labels: Vec<u16>,
    values: Vec<f64>,
    lambda: Vec<f64>,
}

/// Neighbor sums grouped by label.
#[inline]
fn gather(level: &Level, st: &State, i: usize) -> ([u16; 6], [f64; 6], usize, f64) {
    let mut labs = [0u16; 6];
    let mut sums = [0.0; 6];
    let mut cnt = 0;
    let mut total = 0.0;
    for &j in &level.nbrs[i][..2 * level.dim] {
        if j == NONE {
            continue;
        }
        let v = st.values[j as usize];
        if v <= 0.0 {
            continue;
        }
        let l = st.labels[j as usize];
        total += v;
        match labs[..cnt].iter().position(|&x| x == l) {
            Some(p) => sums[p] += v,
            None => {
                labs[cnt] = l;
                sums[cnt] = v;
                cnt += 1;
            }
        }
    }
    (labs, sums, cnt, total)
}

fn sweep(level: &Level, st: &mut State, omega: f64, relabel: bool) {
    let two_d = 2.0 * level.dim as f64;
    let h2 = level.h * level.h;
    let floor = 0.5 * two_d;
    for color in &level.colors {
        for &i in color {
            let i = i as usize;
            let (labs, sums, cnt, total) = gather(level, st, i);
            let old = st.values[i];
            let cur = st.labels[i];
            let k = if relabel {
                if cnt == 0 {
                    st.values[i] = 0.0;
                    continue;
                }
                let mut best = 0;
                for p in 1..cnt {
                    if sums[p] > sums[best] || (sums[p] == sums[best] && labs[p] < labs[best]) {
                        best = p;
                    }
                }
                labs[best]
            } else {
                if old <= 0.0 {
                    continue;
                }
                cur
            };
            let sk = labs[..cnt]
                .iter()
                .position(|&x| x == k)
                .map_or(0.0, |p| sums[p]);
            let s = 2.0 * sk - total;
            let denom = (two_d - st.lambda[k as usize] * h2).max(floor);
            let target = if s > 0.0 { s / denom } else { 0.0 };
            let new = if k == cur && old > 0.0 {
                (old + omega * (target - old)).max(0.0)
            } else {
                target
            };
            st.values[i] = new;
            if new > 0.0 {
                st.labels[i] = k;
            }
        }
    }
}

/// Per-component energy and mass of the signed split, in grid units.
fn energy_split(level: &Level, st: &State, n: usize) -> (Vec<f64>, Vec<f64>) {
    let two_d = 2.0 * level.dim as f64;
    let mut e = vec![0.0; n];
    let mut m = vec![0.0; n];
    for color in &level.colors {
        for &i in color {
            let i = i as usize;
            let v = st.values[i];
            if v <= 0.0 {
                continue;
            }
            let k = st.labels[i];
            let (labs, sums, cnt, total) = gather(level, st, i);
            let sk = labs[..cnt]
                .iter()
                .position(|&x| x == k)
                .map_or(0.0, |p| sums[p]);
            e[k as usize] += v * (two_d * v - 2.0 * sk + total);
            m[k as usize] += v * v;
        }
    }
    let hd = level.h.powi(level.dim as i32);
    let h2 = level.h * level.h;
    (
        e.into_iter().map(|x| x * hd / h2).collect(),
        m.into_iter().map(|x| x * hd).collect(),
    )
}

/// Rescales every component to unit mass and refreshes the eigenvalues.
/// Returns Σ λ_k, or `None` when a component has vanished.
fn renormalize(level: &Level, st: &mut State, n: usize) -> Option<f64> {
    let (_, m) = energy_split(level, st, n);
    if m.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    let scale: Vec<f64> = m.iter().map(|x| 1.0 / x.sqrt()).collect();
    for i in 0..st.values.len() {
        if st.values[i] > 0.0 {
            st.values[i] *= scale[st.labels[i] as usize];
        }
    }
    let (e, m) = energy_split(level, st, n);
    for k in 0..n {
        st.lambda[k] = e[k] / m[k];
    }
    Some(st.lambda.iter().sum())
}

fn to_field(level: &Level, st: &State, n: usize) -> Result<SegregatedField> {
    let len = level.grid.len();
    let mut comps = vec![vec![0.0; len]; n];
    for i in 0..len {
        if st.values[i] > 0.0 && level.grid.is_interior(i) {
            comps[st.labels[i] as usize][i] = st.values[i];
        }
    }
    SegregatedField::new(level.grid.clone(), comps, st.lambda.clone(), true)
}

fn prolongate(level: &Level, coarse: &SegregatedField, n: usize) -> Result<State> {
    let len = level.grid.len();
    let mut st = State {
        labels: vec![0; len],
        values: vec![0.0; len],
        lambda: coarse.eigenvalues().to_vec(),
    };
    for color in &level.colors {
        for &i in color {
            let i = i as usize;
            let x = level.grid.coords(i);
            let s = coarse.sample(&x)?;
            if let Some(k) = s.label {
                st.labels[i] = k as u16;
                st.values[i] = s.value;
            }
        }
    }
    let _ = n;
    Ok(st)
}

fn best_candidate_seeds(domain: &Domain, n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let (lo, hi) = domain.bounds();
    let dim = domain.dim();
    let extent = (0..dim).map(|a| hi[a] - lo[a]).fold(f64::INFINITY, f64::min);
    let margin = 0.05 * extent;
    let draw = |rng: &mut ChaCha8Rng| loop {
        let mut p = [0.0; 3];
        for a in 0..dim {
            p[a] = rng.random_range(lo[a]..hi[a]);
        }
        if domain.signed_distance(&p) > margin {
            return p;
        }
    };
    let mut seeds: Vec<Point> = Vec::with_capacity(n);
    seeds.push(draw(rng));
    while seeds.len() < n {
        let trials = 20 * (seeds.len() + 1);
        let mut best = (f64::NEG_INFINITY, [0.0; 3]);
        for _ in 0..trials {
            let p = draw(rng);
            let d = seeds.iter().map(|s| dist(s, &p)).fold(f64::INFINITY, f64::min);
            if d > best.0 {
                best = (d, p);
            }
        }
        seeds.push(best.1);
    }
    seeds
}

fn initial_state(level: &Level, cfg: &SolveConfig) -> State {
    let n = cfg.components;
    let len = level.grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut st = State {
        labels: vec![0; len],
        values: vec![0.0; len],
        lambda: vec![0.0; n],
    };
    match cfg.layout {
        SeedLayout::Voronoi => {
            let seeds = best_candidate_seeds(&cfg.domain, n, &mut rng);
            for color in &level.colors {
                for &i in color {
                    let i = i as usize;
                    let x = level.grid.coords(i);
                    let mut d1 = (f64::INFINITY, 0usize);
                    let mut d2 = f64::INFINITY;
                    for (k, s) in seeds.iter().enumerate() {
                        let d = dist(s, &x);
                        if d < d1.0 {
                            d2 = d1.0;
                            d1 = (d, k);
                        } else if d < d2 {
                            d2 = d;
                        }
                    }
                    let v = (d2 - d1.0).min(level.grid.domain().signed_distance(&x));
                    if v > 0.0 {
                        st.labels[i] = d1.1 as u16;
                        st.values[i] = v;
                    }
                }
            }
            // Guarantee every component owns at least its seed's nearest node.
            for (k, s) in seeds.iter().enumerate() {
                if (0..len).any(|i| st.values[i] > 0.0 && st.labels[i] as usize == k) {
                    continue;
                }
                let nearest = level
                    .colors
                    .iter()
                    .flatten()
                    .map(|&i| i as usize)
                    .min_by(|&a, &b| {
                        dist(&level.grid.coords(a), s).total_cmp(&dist(&level.grid.coords(b), s))
                    })
                    .expect("interior nodes exist");
                st.labels[nearest] = k as u16;
                st.values[nearest] = level.h;
            }
        }
        SeedLayout::Random => {
            for color in &level.colors {
                for &i in color {
                    let i = i as usize;
                    st.labels[i] = rng.random_range(0..n) as u16;
                    st.values[i] = rng.random_range(0.0..1.0) + f64::EPSILON;
                }
            }
            for k in 0..n {
                if !st.labels.iter().zip(&st.values).any(|(&l, &v)| v > 0.0 && l as usize == k) {
                    let i = level.colors[0][k % level.colors[0].len()] as usize;
                    st.labels[i] = k as u16;
                    st.values[i] = 1.0;
                }
            }
        }
    }
    st
}

fn level_spacings(cfg: &SolveConfig) -> Vec<f64> {
    let (lo, hi) = cfg.domain.bounds();
    let dim = cfg.domain.dim();
    let extent = (0..dim).map(|a| hi[a] - lo[a]).fold(f64::INFINITY, f64::min);
    let mut out = vec![cfg.spacing];
    loop {
        let next = out.last().unwrap() * 2.0;
        if extent / next < cfg.coarsest_cells as f64 {
            break;
        }
        if Grid::from_domain(cfg.domain.clone(), next).is_err() {
            break;
        }
        out.push(next);
    }
    out.reverse();
    out
}

fn solve_level(level: &Level, st: &mut State, cfg: &SolveConfig) -> LevelReport {
    let n = cfg.components;
    let mut report = LevelReport {
        spacing: level.h,
        steps: 0,
        rejected: 0,
        converged: false,
        objective_history: Vec::new(),
    };
    let mut obj = match renormalize(level, st, n) {
        Some(o) => o,
        None => return report,
    };
    report.objective_history.push(obj);
    let mean_lambda = (obj / n as f64).max(1.0);
    let rho_jacobi = (1.0 - mean_lambda * level.h * level.h / (2.0 * level.dim as f64)).max(0.0);
    let omega_opt = 2.0 / (1.0 + (1.0 - rho_jacobi * rho_jacobi).sqrt());
    let mut damping = cfg.damping;
    let mut backup = st.clone();
    while report.steps < cfg.max_iters {
        report.steps += 1;
        backup.clone_from(st);
        let omega = damping * omega_opt;
        for c in 0..cfg.projection_cadence {
            sweep(level, st, omega, c + 1 == cfg.projection_cadence);
        }
        match renormalize(level, st, n) {
            Some(new) if new <= obj => {
                obj = new;
                report.objective_history.push(obj);
                damping = (damping * 1.05).min(cfg.damping);
            }
            _ => {
                std::mem::swap(st, &mut backup);
                report.rejected += 1;
                damping *= 0.5;
                if damping < 1e-3 {
                    report.converged = true;
                    break;
                }
                continue;
            }
        }
        let hist = &report.objective_history;
        if hist.len() > 10 {
            let past = hist[hist.len() - 11];
            if (past - obj).abs() <= cfg.tolerance * obj.abs() {
                report.converged = true;
                break;
            }
        }
    }
    report
}

/// Minimizes Σ λ_k over segregated fields on the configured grid.
///
/// Non-convergence within `max_iters` is reported through
/// [`SolveReport::converged`]; the returned field is the last accepted iterate.
pub fn solve_partition(cfg: &SolveConfig) -> Result<(SegregatedField, SolveReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let fine = Grid::from_domain(cfg.domain.clone(), cfg.spacing)?;
    let interior = (0..fine.len()).filter(|&i| fine.is_interior(i)).count();
    if cfg.components > interior {
        return Err(Error::arg(
            "components",
            format!("{} components for {interior} interior nodes", cfg.components),
        ));
    }
    if cfg.components > u16::MAX as usize {
        return Err(Error::arg("components", "too many"));
    }
    let spacings = level_spacings(cfg);
    let mut levels_out = Vec::new();
    let mut field: Option<SegregatedField> = None;
    let mut iterations = 0;
    let mut rejected = 0;
    for (li, &h) in spacings.iter().enumerate() {
        let grid = if li + 1 == spacings.len() {
            fine.clone()
        } else {
            Grid::from_domain(cfg.domain.clone(), h)?
        };
        let level = Level::new(grid);
        if level.interior_count() < cfg.components {
            continue;
        }
        let mut st = match &field {
            None => initial_state(&level, cfg),
            Some(coarse) => prolongate(&level, coarse, cfg.components)?,
        };
        let rep = solve_level(&level, &mut st, cfg);
        iterations += rep.steps;
        rejected += rep.rejected;
        if rep.objective_history.is_empty() {
            return Err(Error::Degenerate(format!(
                "a component vanished on the level with h = {h}"
            )));
        }
        log::debug!(
            "level h={h}: {} steps, {} rejected, objective {:.8}",
            rep.steps,
            rep.rejected,
            rep.objective_history.last().unwrap()
        );
        levels_out.push(rep);
        field = Some(to_field(&level, &st, cfg.components)?);
    }
    let field = field.expect("at least the finest level runs");
    let last = levels_out.last().expect("finest level");
    let residuals = pde_residual(&field);
    let report = SolveReport {
        iterations,
        objective_history: last.objective_history.clone(),
        eigenvalues: field.eigenvalues().to_vec(),
        objective: field.eigenvalues().iter().sum(),
        residuals,
        converged: last.converged,
        rejected_steps: rejected,
        levels: levels_out,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((field, report))
}

/// −Δ_h of `values` at node `i`; neighbors outside the domain read as zero.
fn neg_laplacian(grid: &Grid, values: &[f64], i: usize) -> f64 {
    let h2 = grid.spacing() * grid.spacing();
    let mut acc = 2.0 * grid.dim() as f64 * values[i];
    for j in grid.axis_neighbors(i).into_iter().flatten() {
        if grid.domain_mask()[j] {
            acc -= values[j];
        }
    }
    acc / h2
}

/// Relative residual of `−Δ_h u_k = λ_k u_k` on nodes whose whole stencil lies
/// in `{u_k > 10⁻⁸ max u_k}`. Normalized by ‖λ_k u_k‖, or ‖u_k‖ when λ_k = 0.
pub fn pde_residual(u: &SegregatedField) -> Vec<f64> {
    let grid = u.grid();
    u.components()
        .iter()
        .zip(u.eigenvalues())
        .map(|(c, &lam)| {
            let max = c.iter().copied().fold(0.0, f64::max);
            if max <= 0.0 {
                return 0.0;
            }
            let thr = 1e-8 * max;
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..grid.len() {
                if !grid.is_interior(i) || c[i] <= thr {
                    continue;
                }
                let stencil_ok = grid
                    .axis_neighbors(i)
                    .into_iter()
                    .all(|nb| nb.is_some_and(|j| c[j] > thr));
                if !stencil_ok {
                    continue;
                }
                let r = neg_laplacian(grid, c, i) - lam * c[i];
                num += r * r;
                let scale = if lam != 0.0 { lam * c[i] } else { c[i] };
                den += scale * scale;
            }
            if den > 0.0 {
                (num / den).sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

/// Σ_k ∫|∇u_k|² with centered differences of the signed functions, one-sided
/// where a neighbor leaves the domain.
pub fn objective_energy(u: &SegregatedField) -> Result<f64> {
    if !u.is_normalized() {
        return Err(Error::NotNormalized(u.l2_norms()));
    }
    let grid = u.grid();
    let comps = u.components();
    let n = comps.len();
    let h = grid.spacing();
    let dim = grid.dim();
    let mask = grid.domain_mask();
    let sum: Vec<f64> = (0..grid.len())
        .map(|i| comps.iter().map(|c| c[i]).sum())
        .collect();
    let signed = |k: usize, i: usize| 2.0 * comps[k][i] - sum[i];
    let grad2 = |k: usize, i: usize, nbrs: &[Option<usize>]| -> f64 {
        let mut g2 = 0.0;
        for a in 0..dim {
            let m = nbrs[2 * a].filter(|&j| mask[j]);
            let p = nbrs[2 * a + 1].filter(|&j| mask[j]);
            let d = match (m, p) {
                (Some(m), Some(p)) => (signed(k, p) - signed(k, m)) / (2.0 * h),
                (None, Some(p)) => (signed(k, p) - signed(k, i)) / h,
                (Some(m), None) => (signed(k, i) - signed(k, m)) / h,
                (None, None) => 0.0,
            };
            g2 += d * d;
        }
        g2
    };
    let w = grid.weights();
    let mut total = 0.0;
    for i in 0..grid.len() {
        if !mask[i] {
            continue;
        }
        let nbrs = grid.axis_neighbors(i);
        let density = match (0..n).find(|&k| comps[k][i] > 0.0) {
            Some(k) => grad2(k, i, &nbrs),
            None => (0..n).map(|k| grad2(k, i, &nbrs)).fold(0.0, f64::max),
        };
        total += w[i] * density;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalityReport {
    pub tol: f64,
    pub nodes_checked: usize,
    /// Nodes where `−Δu_k − λ_k u_k > tol` for some k.
    pub subsolution_violations: usize,
    /// Nodes where `−Δ(u_k − Σ_{j≠k} u_j) − (λ_k u_k − Σ_{j≠k} λ_j u_j) < −tol`.
    pub supersolution_violations: usize,
    /// max of `−Δu_k − λ_k u_k`.
    pub worst_subsolution: f64,
    /// min of the signed supersolution expression.
    pub worst_supersolution: f64,
}

impl ExtremalityReport {
    pub fn violations(&self) -> usize {
        self.subsolution_violations + self.supersolution_violations
    }
}

/// Discrete extremality inequalities on a field.
pub fn extremality_check(u: &SegregatedField, tol: f64) -> ExtremalityReport {
    extremality_check_raw(u.grid(), u.components(), u.eigenvalues(), tol)
}

/// Same as [`extremality_check`] for arbitrary component arrays, including
/// iterates whose supports overlap.
pub fn extremality_check_raw(
    grid: &Grid,
    comps: &[Vec<f64>],
    eigenvalues: &[f64],
    tol: f64,
) -> ExtremalityReport {
    let len = grid.len();
    let sum: Vec<f64> = (0..len).map(|i| comps.iter().map(|c| c[i]).sum()).collect();
    let lsum: Vec<f64> = (0..len)
        .map(|i| comps.iter().zip(eigenvalues).map(|(c, l)| l * c[i]).sum())
        .collect();
    let mut rep = ExtremalityReport {
        tol,
        nodes_checked: 0,
        subsolution_violations: 0,
        supersolution_violations: 0,
        worst_subsolution: f64::NEG_INFINITY,
        worst_supersolution: f64::INFINITY,
    };
    let lap_s: Vec<f64> = (0..len)
        .map(|i| if grid.is_interior(i) { neg_laplacian(grid, &sum, i) } else { 0.0 })
        .collect();
    for i in 0..len {
        if !grid.is_interior(i) {
            continue;
        }
        rep.nodes_checked += 1;
        let mut sub_bad = false;
        let mut sup_bad = false;
        for (c, &lam) in comps.iter().zip(eigenvalues) {
            let lap_k = neg_laplacian(grid, c, i);
            let a = lap_k - lam * c[i];
            let b = 2.0 * lap_k - lap_s[i] - (2.0 * lam * c[i] - lsum[i]);
            rep.worst_subsolution = rep.worst_subsolution.max(a);
            rep.worst_supersolution = rep.worst_supersolution.min(b);
            sub_bad |= a > tol;
            sup_bad |= b < -tol;
        }
        rep.subsolution_violations += sub_bad as usize;
        rep.supersolution_violations += sup_bad as usize;
    }
    rep
}
