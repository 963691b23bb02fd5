//! Classical and smoothed frequency quantities, identity checks and
//! monotonicity diagnostics.
//!
//! Every integral is a polar quadrature around the center: a sphere rule on
//! each radius and Gauss–Legendre panels `[0, r/2]`, `[r/2, r]` in the radial
//! variable, so the kink of the cutoff at `r/2` falls on a panel edge.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SegregatedField;
use crate::grid::{dist, dot, Point};
use crate::quadrature::{gauss_legendre_on, sphere_rule};

/// The radial cutoff: 1 on [0, 1/2], 2 − 2t on [1/2, 1], 0 beyond.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CutoffProfile;

impl CutoffProfile {
    pub fn phi(&self, t: f64) -> f64 {
        if t <= 0.5 {
            1.0
        } else if t <= 1.0 {
            2.0 - 2.0 * t
        } else {
            0.0
        }
    }

    /// Derivative away from the kinks.
    pub fn dphi(&self, t: f64) -> f64 {
        if t > 0.5 && t < 1.0 {
            -2.0
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct SphereSums {
    grad2: f64,
    mass: f64,
    lam_mass: f64,
    dnu_u: f64,
    dnu2: f64,
}

impl SphereSums {
    fn axpy(&mut self, w: f64, o: &SphereSums) {
        self.grad2 += w * o.grad2;
        self.mass += w * o.mass;
        self.lam_mass += w * o.lam_mass;
        self.dnu_u += w * o.dnu_u;
        self.dnu2 += w * o.dnu2;
    }
}

/// Raw integrals around one ball.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Integrals {
    pub d: f64,
    pub lam_ball: f64,
    pub mass_ball: f64,
    pub d_phi: f64,
    pub p_phi: f64,
    pub h_phi: f64,
    pub e_phi: f64,
    pub mass_annulus: f64,
    pub annulus_dnu_u: f64,
    pub h: f64,
    pub sphere_dnu_u: f64,
    pub sphere_dnu2: f64,
    pub sphere_lam: f64,
}

struct Rules {
    dim: usize,
    cache: HashMap<usize, Vec<(Point, f64)>>,
}

impl Rules {
    fn get(&mut self, count: usize) -> &[(Point, f64)] {
        let dim = self.dim;
        self.cache.entry(count).or_insert_with(|| sphere_rule(dim, count))
    }
}

fn sphere_count(dim: usize, rho: f64, h: f64, scale: f64) -> usize {
    if dim == 2 {
        let base = if scale < 1.0 { 32.0 } else { 64.0 };
        (8.0 * PI * rho / h * scale).ceil().max(base) as usize
    } else {
        let base = if scale < 1.0 { 6.0 } else { 12.0 };
        (4.0 * rho / h * scale).ceil().max(base) as usize
    }
}

fn sphere_sums(
    u: &SegregatedField,
    rules: &mut Rules,
    x: &Point,
    rho: f64,
    scale: f64,
) -> Result<SphereSums> {
    let dim = u.dim();
    let h = u.grid().spacing();
    let lam = u.eigenvalues();
    let count = sphere_count(dim, rho, h, scale);
    let area = rho.powi(dim as i32 - 1);
    let mut acc = SphereSums::default();
    for (nu, w) in rules.get(count) {
        let y = [x[0] + rho * nu[0], x[1] + rho * nu[1], x[2] + rho * nu[2]];
        let s = u.sample(&y)?;
        let Some(k) = s.label else { continue };
        let dn = dot(&s.grad, nu);
        let v2 = s.value * s.value;
        let w = w * area;
        acc.grad2 += w * dot(&s.grad, &s.grad);
        acc.mass += w * v2;
        acc.lam_mass += w * lam[k] * v2;
        acc.dnu_u += w * dn * s.value;
        acc.dnu2 += w * dn * dn;
    }
    Ok(acc)
}

pub(crate) fn integrate(
    u: &SegregatedField,
    x: &Point,
    r: f64,
    scale: f64,
) -> Result<Integrals> {
    let h = u.grid().spacing();
    let mut rules = Rules {
        dim: u.dim(),
        cache: HashMap::new(),
    };
    let cutoff = CutoffProfile;
    let nrad = ((0.5 * r / h) * scale).ceil().max(6.0) as usize;
    let mut out = Integrals::default();
    for (lo, hi, outer) in [(0.0, 0.5 * r, false), (0.5 * r, r, true)] {
        for (rho, w) in gauss_legendre_on(nrad, lo, hi) {
            let s = sphere_sums(u, &mut rules, x, rho, scale)?;
            let phi = cutoff.phi(rho / r);
            out.d += w * s.grad2;
            out.lam_ball += w * s.lam_mass;
            out.mass_ball += w * s.mass;
            out.d_phi += w * phi * s.grad2;
            out.p_phi += w * phi * s.lam_mass;
            if outer {
                out.h_phi += w * 2.0 / rho * s.mass;
                out.e_phi += w * 2.0 * rho * s.dnu2;
                out.mass_annulus += w * s.mass;
                out.annulus_dnu_u += w * s.dnu_u;
            }
        }
    }
    let mut top = SphereSums::default();
    top.axpy(1.0, &sphere_sums(u, &mut rules, x, r, scale)?);
    out.h = top.mass;
    out.sphere_dnu_u = top.dnu_u;
    out.sphere_dnu2 = top.dnu2;
    out.sphere_lam = top.lam_mass;
    Ok(out)
}

/// Checks `4h ≤ r ≤ dist(x, ∂Ω) − 2h`.
pub fn check_admissible(u: &SegregatedField, x: &Point, r: f64) -> Result<()> {
    let h = u.grid().spacing();
    let floor = 4.0 * h;
    if !(r >= floor * (1.0 - 1e-9)) {
        return Err(Error::BelowResolution { radius: r, floor });
    }
    let margin = u.grid().domain().signed_distance(x);
    if r > margin - 2.0 * h + 1e-12 {
        return Err(Error::BallNotContained {
            center: *x,
            radius: r,
            margin,
        });
    }
    Ok(())
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalQuantities {
    pub d: f64,
    pub h: f64,
    /// Σ λ_k ∫_{B_r} |u_k|².
    pub lambda_mass: f64,
    pub f: f64,
    pub i: f64,
    pub g: f64,
    pub height_vanishes: bool,
    pub quad_err_i: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedQuantities {
    pub d_phi: f64,
    pub h_phi: f64,
    pub f_phi: f64,
    pub e_phi: f64,
    pub p_phi: f64,
    pub i_phi: f64,
    pub g_phi: f64,
    pub height_vanishes: bool,
    pub quad_err_i_phi: f64,
    /// ∫_{B_r∖B_{r/2}} |u|², for the sandwich bound on H_φ.
    pub annulus_mass: f64,
}

fn classical_from(r: f64, q: &Integrals, coarse: &Integrals) -> ClassicalQuantities {
    let f = q.d - q.lam_ball;
    let i = ratio(r * q.d, q.h);
    let i_coarse = ratio(r * coarse.d, coarse.h);
    ClassicalQuantities {
        d: q.d,
        h: q.h,
        lambda_mass: q.lam_ball,
        f,
        i,
        g: ratio(r * f + q.h, q.h),
        height_vanishes: !(q.h > 0.0),
        quad_err_i: (i - i_coarse).abs(),
    }
}

fn smoothed_from(r: f64, q: &Integrals, coarse: &Integrals) -> SmoothedQuantities {
    let f_phi = q.d_phi - q.p_phi;
    let i_phi = ratio(r * q.d_phi, q.h_phi);
    let i_coarse = ratio(r * coarse.d_phi, coarse.h_phi);
    SmoothedQuantities {
        d_phi: q.d_phi,
        h_phi: q.h_phi,
        f_phi,
        e_phi: q.e_phi,
        p_phi: q.p_phi,
        i_phi,
        g_phi: ratio(r * f_phi + q.h_phi, q.h_phi),
        height_vanishes: !(q.h_phi > 0.0),
        quad_err_i_phi: (i_phi - i_coarse).abs(),
        annulus_mass: q.mass_annulus,
    }
}

/// D, H, F, I, G on `B_r(x)`.
pub fn classical_at(u: &SegregatedField, x: &Point, r: f64) -> Result<ClassicalQuantities> {
    check_admissible(u, x, r)?;
    let q = integrate(u, x, r, 1.0)?;
    let c = integrate(u, x, r, 0.5)?;
    Ok(classical_from(r, &q, &c))
}

/// D_φ, H_φ, F_φ, E_φ, P_φ, I_φ, G_φ on `B_r(x)`.
pub fn smoothed_at(u: &SegregatedField, x: &Point, r: f64) -> Result<SmoothedQuantities> {
    check_admissible(u, x, r)?;
    let q = integrate(u, x, r, 1.0)?;
    let c = integrate(u, x, r, 0.5)?;
    Ok(smoothed_from(r, &q, &c))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRecord {
    pub center: Point,
    pub radius: f64,
    pub classical: ClassicalQuantities,
    pub smoothed: SmoothedQuantities,
    pub additive: f64,
    pub i_phi_a: f64,
}

impl FrequencyRecord {
    pub const CSV_HEADER: [&'static str; 24] = [
        "x", "y", "z", "r", "D", "H", "L", "F", "I", "G", "D_phi", "H_phi", "F_phi", "E_phi",
        "P_phi", "I_phi", "G_phi", "A", "I_phi_A", "quad_err_I", "quad_err_I_phi",
        "height_vanishes", "annulus_mass", "smoothed_height_vanishes",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        let c = &self.classical;
        let s = &self.smoothed;
        let f = |v: f64| format!("{v:.12e}");
        vec![
            f(self.center[0]),
            f(self.center[1]),
            f(self.center[2]),
            f(self.radius),
            f(c.d),
            f(c.h),
            f(c.lambda_mass),
            f(c.f),
            f(c.i),
            f(c.g),
            f(s.d_phi),
            f(s.h_phi),
            f(s.f_phi),
            f(s.e_phi),
            f(s.p_phi),
            f(s.i_phi),
            f(s.g_phi),
            f(self.additive),
            f(self.i_phi_a),
            f(c.quad_err_i),
            f(s.quad_err_i_phi),
            c.height_vanishes.to_string(),
            f(s.annulus_mass),
            s.height_vanishes.to_string(),
        ]
    }
}

/// Full record with the additive correction `I_φ^A = I_φ + A r²`.
pub fn frequency_record(
    u: &SegregatedField,
    x: &Point,
    r: f64,
    additive: f64,
) -> Result<FrequencyRecord> {
    check_admissible(u, x, r)?;
    let q = integrate(u, x, r, 1.0)?;
    let c = integrate(u, x, r, 0.5)?;
    let smoothed = smoothed_from(r, &q, &c);
    Ok(FrequencyRecord {
        center: *x,
        radius: r,
        classical: classical_from(r, &q, &c),
        smoothed,
        additive,
        i_phi_a: smoothed.i_phi + additive * r * r,
    })
}

/// `I_φ(x, r)` without the coarse error estimate.
pub fn smoothed_frequency(u: &SegregatedField, x: &Point, r: f64) -> Result<f64> {
    check_admissible(u, x, r)?;
    let q = integrate(u, x, r, 1.0)?;
    Ok(ratio(r * q.d_phi, q.h_phi))
}

/// `I(x, r)` without the coarse error estimate.
pub fn classical_frequency(u: &SegregatedField, x: &Point, r: f64) -> Result<f64> {
    check_admissible(u, x, r)?;
    let q = integrate(u, x, r, 1.0)?;
    Ok(ratio(r * q.d, q.h))
}

/// `count` radii in geometric progression from `r_min` to `r_max`.
pub fn geometric_radii(r_min: f64, r_max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![r_min],
        _ => {
            let q = (r_max / r_min).ln() / (count - 1) as f64;
            (0..count).map(|i| r_min * (q * i as f64).exp()).collect()
        }
    }
}

/// Smallest Λ ≥ 0 with `e^{Λ r²} v(r)` nondecreasing over the samples.
pub fn fit_exponential_constant(radii: &[f64], values: &[f64]) -> f64 {
    let mut lam: f64 = 0.0;
    for i in 1..radii.len() {
        let (a, b) = (values[i - 1], values[i]);
        if !(a > 0.0 && b > 0.0) {
            continue;
        }
        let dr2 = radii[i] * radii[i] - radii[i - 1] * radii[i - 1];
        if dr2 > 0.0 {
            lam = lam.max((a / b).ln() / dr2);
        }
    }
    lam
}

/// Scale bound `√(log(4/3)(n−1)/(2λ_M))` below which the frequency
/// estimates are stated; infinite when λ_M ≤ 0.
pub fn scale_limit(dim: usize, lambda_max: f64) -> f64 {
    if lambda_max <= 0.0 {
        f64::INFINITY
    } else {
        ((4.0f64 / 3.0).ln() * (dim as f64 - 1.0) / (2.0 * lambda_max)).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    pub center: Point,
    pub records: Vec<FrequencyRecord>,
    /// Fitted Λ̂ making `e^{Λ̂ r²} I` nondecreasing.
    pub lambda_hat: f64,
    /// Same for `I_φ`.
    pub lambda_hat_phi: f64,
    /// Radii beyond the scale limit for the almost-monotonicity estimates.
    pub beyond_scale_limit: usize,
}

impl FrequencyProfile {
    pub fn radii(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.radius).collect()
    }

    pub fn classical(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.classical.i).collect()
    }

    pub fn smoothed(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.smoothed.i_phi).collect()
    }

    /// Largest relative drop of `e^{(2λ_M/(n−1)) r²} G` between consecutive
    /// radii (0 when nondecreasing).
    pub fn g_monotonicity_violation(&self, dim: usize, lambda_max: f64) -> f64 {
        let c = 2.0 * lambda_max.max(0.0) / (dim as f64 - 1.0);
        let g: Vec<f64> = self
            .records
            .iter()
            .map(|r| (c * r.radius * r.radius).exp() * r.classical.g)
            .collect();
        g.windows(2)
            .filter(|w| w[0].is_finite() && w[1].is_finite())
            .map(|w| ((w[0] - w[1]) / w[0].abs()).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Records at every radius plus the fitted exponential constants.
pub fn frequency_profile(
    u: &SegregatedField,
    x: &Point,
    radii: &[f64],
    additive: f64,
) -> Result<FrequencyProfile> {
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("radii", "must be strictly increasing"));
    }
    let records = radii
        .par_iter()
        .map(|&r| frequency_record(u, x, r, additive))
        .collect::<Result<Vec<_>>>()?;
    let limit = scale_limit(u.dim(), u.lambda_max());
    let beyond = radii.iter().filter(|&&r| r > limit).count();
    if beyond > 0 {
        log::warn!(
            "{beyond} radii exceed the scale limit {limit:.4} for lambda_max = {}",
            u.lambda_max()
        );
    }
    let i: Vec<f64> = records.iter().map(|r| r.classical.i).collect();
    let ip: Vec<f64> = records.iter().map(|r| r.smoothed.i_phi).collect();
    Ok(FrequencyProfile {
        center: *x,
        lambda_hat: fit_exponential_constant(radii, &i),
        lambda_hat_phi: fit_exponential_constant(radii, &ip),
        records,
        beyond_scale_limit: beyond,
    })
}

/// `W^c_{s,t}(x) = I_φ(x,t) − I_φ(x,s) + c (t² − s²)`.
pub fn pinching(u: &SegregatedField, x: &Point, s: f64, t: f64, c: f64) -> Result<f64> {
    if s > t {
        return Err(Error::arg("s", format!("{s} exceeds t = {t}")));
    }
    let it = smoothed_frequency(u, x, t)?;
    let is = smoothed_frequency(u, x, s)?;
    Ok(it - is + c * (t * t - s * s))
}

/// `D/r^{n−2+2α} − α H/r^{n−1+2α} + E r²`.
pub fn weiss_value(u: &SegregatedField, x: &Point, r: f64, alpha: f64, e: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::arg("alpha", "must be positive"));
    }
    check_admissible(u, x, r)?;
    let q = integrate(u, x, r, 1.0)?;
    let n = u.dim() as f64;
    Ok(q.d / r.powf(n - 2.0 + 2.0 * alpha) - alpha * q.h / r.powf(n - 1.0 + 2.0 * alpha)
        + e * r * r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relative: f64,
}

impl IdentityResidual {
    fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let relative = if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 };
        IdentityResidual {
            name: name.into(),
            lhs,
            rhs,
            relative,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub center: Point,
    pub radius: f64,
    /// D = ∫_{∂B}⟨∂_ν u, u⟩ + Σλ_k ∫_B |u_k|².
    pub dirichlet_alternative: IdentityResidual,
    /// d/dr (H/r^{n−1}) = 2F/r^{n−1}.
    pub height_scaling: IdentityResidual,
    /// d/dr (D/r^{n−2}) from the domain variation.
    pub energy_scaling: IdentityResidual,
    /// F_φ = (2/r) ∫_{B_r∖B_{r/2}} ⟨∂_ν u, u⟩.
    pub smoothed_dirichlet_alternative: IdentityResidual,
    /// ∂_r H_φ = (n−1)/r H_φ + 2F_φ.
    pub smoothed_height_scaling: IdentityResidual,
    /// ∫_B |u|² ≤ (r² D + r H)/(n−1): lhs, rhs and slack = rhs − lhs.
    pub poincare_lhs: f64,
    pub poincare_rhs: f64,
    pub poincare_slack: f64,
}

impl IdentityReport {
    /// Largest relative residual among the identities.
    pub fn max_relative(&self) -> f64 {
        [
            &self.dirichlet_alternative,
            &self.height_scaling,
            &self.energy_scaling,
            &self.smoothed_dirichlet_alternative,
            &self.smoothed_height_scaling,
        ]
        .iter()
        .map(|r| r.relative)
        .fold(0.0, f64::max)
    }
}

/// Evaluates both sides of the stationarity identities on `B_r(x)`. Radial
/// derivatives use central differences with step h, so `r + h` must also be
/// admissible.
pub fn identity_suite(u: &SegregatedField, x: &Point, r: f64) -> Result<IdentityReport> {
    let h = u.grid().spacing();
    check_admissible(u, x, r)?;
    check_admissible(u, x, r + h)?;
    let n = u.dim() as f64;
    let q = integrate(u, x, r, 1.0)?;
    let qp = integrate(u, x, r + h, 1.0)?;
    let qm = integrate(u, x, r - h, 1.0)?;
    let f = q.d - q.lam_ball;
    let f_phi = q.d_phi - q.p_phi;

    let hn = |q: &Integrals, r: f64| q.h / r.powf(n - 1.0);
    let dn = |q: &Integrals, r: f64| q.d / r.powf(n - 2.0);
    let dh = (hn(&qp, r + h) - hn(&qm, r - h)) / (2.0 * h);
    let dd = (dn(&qp, r + h) - dn(&qm, r - h)) / (2.0 * h);
    let energy_rhs = 2.0 / r.powf(n - 2.0) * q.sphere_dnu2 + q.sphere_lam / r.powf(n - 2.0)
        - n / r.powf(n - 1.0) * q.lam_ball;
    let dh_phi = (qp.h_phi - qm.h_phi) / (2.0 * h);
    let poincare_rhs = (r * r * q.d + r * q.h) / (n - 1.0);
    Ok(IdentityReport {
        center: *x,
        radius: r,
        dirichlet_alternative: IdentityResidual::new(
            "dirichlet_alternative",
            q.d,
            q.sphere_dnu_u + q.lam_ball,
        ),
        height_scaling: IdentityResidual::new("height_scaling", dh, 2.0 * f / r.powf(n - 1.0)),
        energy_scaling: IdentityResidual::new("energy_scaling", dd, energy_rhs),
        smoothed_dirichlet_alternative: IdentityResidual::new(
            "smoothed_dirichlet_alternative",
            f_phi,
            2.0 / r * q.annulus_dnu_u,
        ),
        smoothed_height_scaling: IdentityResidual::new(
            "smoothed_height_scaling",
            dh_phi,
            (n - 1.0) / r * q.h_phi + 2.0 * f_phi,
        ),
        poincare_lhs: q.mass_ball,
        poincare_rhs,
        poincare_slack: poincare_rhs - q.mass_ball,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub radius: f64,
    pub additive: f64,
    /// Pinching `W^{2+A+A²}_{r/8,4r}` at both endpoints.
    pub pinching: [f64; 2],
    pub samples: Vec<(Point, f64)>,
    /// max over sample pairs of `|I_φ(y,r) − I_φ(z,r)|`.
    pub max_oscillation: f64,
    /// max over pairs of lhs / ((√W₁ + √W₂)|y−z|/r); NaN when both sides vanish.
    pub ratio: f64,
    /// True when a pinching value was negative (clipped to 0 under the root).
    pub negative_pinching: bool,
}

/// Compares the oscillation of `I_φ(·, r)` along the segment `[x1, x2]` with
/// the pinching at its endpoints, on 10 samples.
pub fn oscillation_check(
    u: &SegregatedField,
    x1: &Point,
    x2: &Point,
    r: f64,
    additive: f64,
) -> Result<OscillationReport> {
    if dist(x1, x2) > r / 4.0 + 1e-12 {
        return Err(Error::arg("x2", "endpoints farther apart than r/4"));
    }
    for x in [x1, x2] {
        check_admissible(u, x, 4.0 * r)?;
        check_admissible(u, x, r / 8.0)?;
    }
    let c = 2.0 + additive + additive * additive;
    let w1 = pinching(u, x1, r / 8.0, 4.0 * r, c)?;
    let w2 = pinching(u, x2, r / 8.0, 4.0 * r, c)?;
    let pts: Vec<Point> = (0..10)
        .map(|i| {
            let t = i as f64 / 9.0;
            [
                x1[0] + t * (x2[0] - x1[0]),
                x1[1] + t * (x2[1] - x1[1]),
                x1[2] + t * (x2[2] - x1[2]),
            ]
        })
        .collect();
    let vals = pts
        .par_iter()
        .map(|p| smoothed_frequency(u, p, r))
        .collect::<Result<Vec<_>>>()?;
    let root = w1.max(0.0).sqrt() + w2.max(0.0).sqrt();
    let mut max_osc: f64 = 0.0;
    let mut ratio_max = f64::NAN;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let lhs = (vals[i] - vals[j]).abs();
            max_osc = max_osc.max(lhs);
            let sep = dist(&pts[i], &pts[j]);
            if sep == 0.0 {
                continue;
            }
            let rhs = root * sep / r;
            if rhs > 0.0 {
                let q = lhs / rhs;
                ratio_max = if ratio_max.is_nan() { q } else { ratio_max.max(q) };
            }
        }
    }
    Ok(OscillationReport {
        radius: r,
        additive,
        pinching: [w1, w2],
        samples: pts.into_iter().zip(vals).collect(),
        max_oscillation: max_osc,
        ratio: ratio_max,
        negative_pinching: w1 < 0.0 || w2 < 0.0,
    })
}

/// Smallest Ĉ ≥ 1 with `I_φ(x,r) ≤ Ĉ I(x,r)` and `I_φ(x,r) ≥ I(x,r/2)/Ĉ` over
/// the given points and radii (radii whose half falls below 4h are skipped).
pub fn comparison_constant(u: &SegregatedField, points: &[Point], radii: &[f64]) -> Result<f64> {
    let floor = 4.0 * u.grid().spacing() * (1.0 - 1e-9);
    let pairs: Vec<(Point, f64)> = points
        .iter()
        .flat_map(|p| radii.iter().filter(|&&r| r / 2.0 >= floor).map(move |&r| (*p, r)))
        .collect();
    let ratios = pairs
        .par_iter()
        .map(|(p, r)| -> Result<f64> {
            let ip = smoothed_frequency(u, p, *r)?;
            let i = classical_frequency(u, p, *r)?;
            let ih = classical_frequency(u, p, r / 2.0)?;
            Ok((ip / i).max(ih / ip))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ratios
        .into_iter()
        .filter(|v| v.is_finite())
        .fold(1.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Domain, Grid};
    use crate::oracle::{make_oracle, OracleSpec};

    #[test]
    fn cutoff_shape() {
        let c = CutoffProfile;
        assert_eq!(c.phi(0.0), 1.0);
        assert_eq!(c.phi(0.5), 1.0);
        assert_eq!(c.phi(0.75), 0.5);
        assert_eq!(c.phi(1.0), 0.0);
        assert_eq!(c.phi(3.0), 0.0);
        assert_eq!(c.dphi(0.7), -2.0);
        assert_eq!(c.dphi(0.2), 0.0);
    }

    #[test]
    fn fitted_constant_for_monotone_data_is_zero() {
        assert_eq!(fit_exponential_constant(&[1.0, 2.0, 3.0], &[1.0, 1.0, 2.0]), 0.0);
        let lam = fit_exponential_constant(&[1.0, 2.0], &[2.0, 1.0]);
        assert!(((lam * 3.0).exp() * 1.0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_m2_has_unit_frequency() {
        let g = Grid::from_domain(Domain::rectangle(&[-1.0, -1.0], &[1.0, 1.0]), 1.0 / 64.0)
            .unwrap();
        let u = make_oracle(&g, &OracleSpec::new(2, [0.0; 3]).rotated(0.3)).unwrap();
        for r in [0.1, 0.3, 0.6] {
            let c = classical_at(&u, &[0.0; 3], r).unwrap();
            assert!((c.i - 1.0).abs() < 0.02, "r={r} I={}", c.i);
            assert_eq!(c.f, c.d);
        }
    }
}
