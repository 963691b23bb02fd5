//! Staged runs: solve, analyze, cover and report, with every artifact
//! written under one output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::covering::{
    dyadic_rhos, inductive_cover, tube_volume_curve, CoverConfig, Covering, MinkowskiCurve, Region,
    StopReason,
};
use crate::dump::{read_dump, write_dump};
use crate::error::{Error, Result};
use crate::field::SegregatedField;
use crate::frequency::{
    check_admissible, comparison_constant, frequency_profile, geometric_radii, identity_suite,
    FrequencyRecord, IdentityReport,
};
use crate::grid::{Domain, Grid, Point};
use crate::oracle::{make_oracle, OracleSpec};
use crate::singular::{
    clearing_sweep, detect, interface_points, Classification, DetectConfig, SingularSample,
};
use crate::solver::{solve_partition, SolveConfig, SolveReport};

pub const FIELD_FILE: &str = "field.sgf";
pub const SOLVE_REPORT_FILE: &str = "solve_report.json";
pub const FREQUENCY_FILE: &str = "frequency.csv";
pub const SINGULAR_FILE: &str = "singular.json";
pub const IDENTITIES_FILE: &str = "identities.json";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const COVERING_FILE: &str = "covering.json";
pub const MINKOWSKI_FILE: &str = "minkowski.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SUMMARY_TEXT_FILE: &str = "summary.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Solve,
    Analyze,
    Cover,
    Report,
}

/// A homogeneous oracle used in place of a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleRun {
    pub m: usize,
    pub rotation: f64,
    pub spacing: f64,
    /// The grid is the cube [−half_width, half_width]^dim.
    pub half_width: f64,
    pub dim: usize,
}

impl Default for OracleRun {
    fn default() -> Self {
        OracleRun {
            m: 3,
            rotation: 0.0,
            spacing: 1.0 / 128.0,
            half_width: 1.0,
            dim: 2,
        }
    }
}

impl OracleRun {
    pub fn field(&self) -> Result<SegregatedField> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::arg("dim", format!("{} not in 2..=3", self.dim)));
        }
        let w = self.half_width;
        let lo = vec![-w; self.dim];
        let hi = vec![w; self.dim];
        let grid = Grid::from_domain(Domain::rectangle(&lo, &hi), self.spacing)?;
        make_oracle(&grid, &OracleSpec::new(self.m, [0.0; 3]).rotated(self.rotation))
    }
}

/// Geometric radii per analysis point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiiSpec {
    /// Smallest radius, in cells, when `min_radius` is unset.
    pub min_cells: f64,
    /// Absolute smallest radius; radii below 4h are then dropped with a warning.
    pub min_radius: Option<f64>,
    pub max_radius: f64,
    pub count: usize,
}

impl Default for RadiiSpec {
    fn default() -> Self {
        RadiiSpec {
            min_cells: 4.0,
            min_radius: None,
            max_radius: 0.25,
            count: 12,
        }
    }
}

impl RadiiSpec {
    /// Parses `rmin:rmax:count`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::arg("radii", format!("`{s}` is not rmin:rmax:count"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo && count > 0) {
            return Err(bad());
        }
        Ok(RadiiSpec {
            min_cells: 4.0,
            min_radius: Some(lo),
            max_radius: hi,
            count,
        })
    }

    /// Admissible radii around `x`.
    pub fn radii_for(&self, u: &SegregatedField, x: &Point) -> Vec<f64> {
        let h = u.grid().spacing();
        let margin = u.grid().domain().signed_distance(x) - 2.0 * h;
        let raw = match self.min_radius {
            Some(lo) => geometric_radii(lo, self.max_radius, self.count),
            None => {
                let lo = self.min_cells * h;
                let hi = self.max_radius.min(margin);
                if hi < lo {
                    log::warn!("no admissible radii at {x:?}");
                    return Vec::new();
                }
                geometric_radii(lo, hi, self.count)
            }
        };
        let (ok, skipped): (Vec<f64>, Vec<f64>) = raw
            .into_iter()
            .partition(|&r| check_admissible(u, x, r).is_ok());
        if !skipped.is_empty() {
            log::warn!("skipping {} inadmissible radii at {x:?}: {skipped:?}", skipped.len());
        }
        ok
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub radii: RadiiSpec,
    pub detection: DetectConfig,
    /// Relative slack for the G monotonicity check.
    pub monotonicity_slack: f64,
    pub clearing_eps: f64,
    pub clearing_radius_cells: f64,
    pub clearing_spacing_cells: f64,
    /// Ball radius for the identity suite (clipped to the admissible range).
    pub identity_radius: f64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            radii: RadiiSpec::default(),
            detection: DetectConfig::default(),
            monotonicity_slack: 1e-3,
            clearing_eps: 0.2,
            clearing_radius_cells: 8.0,
            clearing_spacing_cells: 16.0,
            identity_radius: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TubeConfig {
    pub region: Region,
    pub rho_min_cells: f64,
    pub rho_max: f64,
}

impl Default for TubeConfig {
    fn default() -> Self {
        TubeConfig {
            region: Region::Domain,
            rho_min_cells: 2.0,
            rho_max: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub stages: Vec<Stage>,
    pub solver: SolveConfig,
    /// Replaces the solve stage when set.
    pub oracle: Option<OracleRun>,
    pub analysis: AnalyzeConfig,
    pub covering: CoverConfig,
    pub tubes: TubeConfig,
    pub output: PathBuf,
    /// Overrides `solver.seed` when set.
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            stages: vec![Stage::Solve, Stage::Analyze, Stage::Cover, Stage::Report],
            solver: SolveConfig::default(),
            oracle: None,
            analysis: AnalyzeConfig::default(),
            covering: CoverConfig::default(),
            tubes: TubeConfig::default(),
            output: PathBuf::from("out"),
            seed: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("stages", "must follow solve, analyze, cover, report order without repeats"));
        }
        if self.oracle.is_some() && self.stages.contains(&Stage::Solve) {
            return Err(Error::arg("stages", "an oracle run has no solve stage"));
        }
        if self.stages.contains(&Stage::Solve) {
            self.solver_config().validate()?;
        }
        if self.stages.contains(&Stage::Cover) {
            self.covering.validate()?;
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolveConfig {
        let mut s = self.solver.clone();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s
    }

    fn path(&self, name: &str) -> PathBuf {
        self.output.join(name)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Solves and writes the field dump and the solve report. Returns whether
/// the finest level converged.
pub fn run_solve(cfg: &RunConfig) -> Result<bool> {
    let scfg = cfg.solver_config();
    scfg.validate()?;
    ensure_dir(&cfg.output)?;
    let (u, report) = solve_partition(&scfg)?;
    write_dump(&u, &cfg.path(FIELD_FILE))?;
    write_json(&cfg.path(SOLVE_REPORT_FILE), &report)?;
    if !report.converged {
        log::warn!("solver stopped at max_iters without converging");
    }
    Ok(report.converged)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointAnalysis {
    pub location: Point,
    pub classification: Option<Classification>,
    pub order: Option<f64>,
    pub radii: usize,
    pub lambda_hat: f64,
    pub lambda_hat_phi: f64,
    pub g_violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClearingSummary {
    pub radius: f64,
    pub eps: f64,
    pub points: usize,
    pub violations: usize,
    /// ε̂′: smallest I_φ among balls whose r/16-core meets the interface.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityMaxima {
    pub dirichlet_alternative: f64,
    pub smoothed_dirichlet_alternative: f64,
    pub smoothed_height_scaling: f64,
    pub height_scaling: f64,
    pub energy_scaling: f64,
    pub poincare_min_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub source: String,
    pub dim: usize,
    pub spacing: f64,
    pub n_components: usize,
    pub eigenvalues: Vec<f64>,
    pub points: Vec<PointAnalysis>,
    pub lambda_hat: f64,
    pub lambda_hat_phi: f64,
    pub comparison_constant: f64,
    pub monotonicity_slack: f64,
    pub monotonicity_violations: usize,
    pub max_monotonicity_violation: f64,
    pub identities: IdentityMaxima,
    pub clearing: ClearingSummary,
    pub interface_cells: usize,
    pub junction_candidates: usize,
    pub excluded_near_boundary: usize,
    pub detector_agreement: f64,
}

fn load_source(cfg: &RunConfig) -> Result<(SegregatedField, String)> {
    match &cfg.oracle {
        Some(o) => {
            let u = o.field()?;
            ensure_dir(&cfg.output)?;
            write_dump(&u, &cfg.path(FIELD_FILE))?;
            Ok((u, format!("oracle m={}", o.m)))
        }
        None => Ok((read_dump(&cfg.path(FIELD_FILE))?, "solve".into())),
    }
}

fn clearing_points(u: &SegregatedField, spacing: f64, margin: f64) -> Vec<Point> {
    let g = u.grid();
    let (lo, hi) = g.domain().bounds();
    let dim = g.dim();
    let n: Vec<usize> = (0..3)
        .map(|a| if a < dim { ((hi[a] - lo[a]) / spacing).floor() as usize + 1 } else { 1 })
        .collect();
    let mut out = Vec::new();
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let idx = [i, j, k];
                let mut p = [0.0; 3];
                for a in 0..dim {
                    p[a] = lo[a] + idx[a] as f64 * spacing;
                }
                if g.domain().signed_distance(&p) >= margin {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Detection, frequency profiles, identities and fitted constants.
pub fn run_analyze(cfg: &RunConfig) -> Result<AnalysisReport> {
    let (u, source) = load_source(cfg)?;
    let acfg = &cfg.analysis;
    let h = u.grid().spacing();
    let detection = detect(&u, &acfg.detection)?;

    let mut locations: Vec<(Point, Option<&SingularSample>)> = Vec::new();
    if cfg.oracle.is_some() {
        locations.push(([0.0; 3], None));
    }
    locations.extend(detection.samples.iter().map(|s| (s.location, Some(s))));

    let profiles = locations
        .par_iter()
        .map(|(x, _)| {
            let radii = acfg.radii.radii_for(&u, x);
            if radii.is_empty() {
                Ok(None)
            } else {
                frequency_profile(&u, x, &radii, 0.0).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut writer = csv::Writer::from_path(cfg.path(FREQUENCY_FILE))?;
    writer.write_record(FrequencyRecord::CSV_HEADER)?;
    for p in profiles.iter().flatten() {
        for r in &p.records {
            writer.write_record(r.csv_row())?;
        }
    }
    writer.flush().map_err(|e| Error::io(cfg.path(FREQUENCY_FILE), e))?;

    let lambda_max = u.lambda_max();
    let points: Vec<PointAnalysis> = locations
        .iter()
        .zip(&profiles)
        .map(|((x, s), p)| PointAnalysis {
            location: *x,
            classification: s.map(|s| s.classification),
            order: s.map(|s| s.order),
            radii: p.as_ref().map_or(0, |p| p.records.len()),
            lambda_hat: p.as_ref().map_or(0.0, |p| p.lambda_hat),
            lambda_hat_phi: p.as_ref().map_or(0.0, |p| p.lambda_hat_phi),
            g_violation: p
                .as_ref()
                .map_or(0.0, |p| p.g_monotonicity_violation(u.dim(), lambda_max)),
        })
        .collect();

    let identities: Vec<IdentityReport> = locations
        .par_iter()
        .filter_map(|(x, _)| {
            let margin = u.grid().domain().signed_distance(x);
            let r = acfg.identity_radius.min(margin - 3.0 * h);
            (r >= 4.0 * h).then(|| identity_suite(&u, x, r))
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(&cfg.path(IDENTITIES_FILE), &identities)?;
    let fold = |f: &dyn Fn(&IdentityReport) -> f64| identities.iter().map(f).fold(0.0, f64::max);
    let maxima = IdentityMaxima {
        dirichlet_alternative: fold(&|r| r.dirichlet_alternative.relative),
        smoothed_dirichlet_alternative: fold(&|r| r.smoothed_dirichlet_alternative.relative),
        smoothed_height_scaling: fold(&|r| r.smoothed_height_scaling.relative),
        height_scaling: fold(&|r| r.height_scaling.relative),
        energy_scaling: fold(&|r| r.energy_scaling.relative),
        poincare_min_slack: identities
            .iter()
            .map(|r| r.poincare_slack)
            .fold(f64::INFINITY, f64::min),
    };

    let c_hats = locations
        .iter()
        .map(|(x, _)| {
            let radii = acfg.radii.radii_for(&u, x);
            comparison_constant(&u, &[*x], &radii)
        })
        .collect::<Result<Vec<_>>>()?;
    let c_hat = c_hats.into_iter().fold(1.0, f64::max);

    let cr = acfg.clearing_radius_cells * h;
    let cpoints = clearing_points(&u, acfg.clearing_spacing_cells * h, cr + 2.0 * h);
    let (reports, threshold) = clearing_sweep(&u, &cpoints, cr, acfg.clearing_eps)?;
    let clearing = ClearingSummary {
        radius: cr,
        eps: acfg.clearing_eps,
        points: reports.len(),
        violations: reports.iter().filter(|r| !r.holds()).count(),
        threshold,
    };

    write_json(&cfg.path(SINGULAR_FILE), &detection.samples)?;
    let max_v = points.iter().map(|p| p.g_violation).fold(0.0, f64::max);
    let report = AnalysisReport {
        source,
        dim: u.dim(),
        spacing: h,
        n_components: u.n_components(),
        eigenvalues: u.eigenvalues().to_vec(),
        lambda_hat: points.iter().map(|p| p.lambda_hat).fold(0.0, f64::max),
        lambda_hat_phi: points.iter().map(|p| p.lambda_hat_phi).fold(0.0, f64::max),
        comparison_constant: c_hat,
        monotonicity_slack: acfg.monotonicity_slack,
        monotonicity_violations: points
            .iter()
            .filter(|p| p.g_violation > acfg.monotonicity_slack)
            .count(),
        max_monotonicity_violation: max_v,
        points,
        identities: maxima,
        clearing,
        interface_cells: detection.interface_cells,
        junction_candidates: detection.junction_candidates,
        excluded_near_boundary: detection.excluded_near_boundary,
        detector_agreement: detection.agreement(),
    };
    write_json(&cfg.path(ANALYSIS_FILE), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverArtifact {
    pub covering: Option<Covering>,
    pub junction_tube: Option<MinkowskiCurve>,
    pub interface_tube: Option<MinkowskiCurve>,
}

/// Covering of the junctions plus the junction and interface tube curves.
pub fn cover_junctions(
    u: &SegregatedField,
    junctions: &[Point],
    covering: &CoverConfig,
    tubes: &TubeConfig,
) -> Result<CoverArtifact> {
    let h = u.grid().spacing();
    let rhos = dyadic_rhos(tubes.rho_min_cells * h, tubes.rho_max);
    let (covering, junction_tube) = if junctions.is_empty() {
        (None, None)
    } else {
        (
            Some(inductive_cover(u, junctions, covering)?),
            Some(tube_volume_curve(u.grid(), junctions, &tubes.region, &rhos)?),
        )
    };
    let wall = interface_points(u);
    let interface_tube = if wall.is_empty() {
        None
    } else {
        Some(tube_volume_curve(u.grid(), &wall, &tubes.region, &rhos)?)
    };
    Ok(CoverArtifact {
        covering,
        junction_tube,
        interface_tube,
    })
}

/// Writes `covering.json` and `minkowski.csv` into `dir`.
pub fn write_cover(dir: &Path, art: &CoverArtifact) -> Result<()> {
    ensure_dir(dir)?;
    write_json(&dir.join(COVERING_FILE), art)?;
    let path = dir.join(MINKOWSKI_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["set", "rho", "volume"])?;
    for (name, c) in [("junction", &art.junction_tube), ("interface", &art.interface_tube)] {
        if let Some(c) = c {
            for [r, v] in c.csv_rows() {
                w.write_record([name.to_string(), r, v])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Junction locations among detected samples.
pub fn junction_locations(samples: &[SingularSample]) -> Vec<Point> {
    samples
        .iter()
        .filter(|s| s.classification == Classification::Junction)
        .map(|s| s.location)
        .collect()
}

/// Reads a JSON array of detected samples.
pub fn read_samples(path: &Path) -> Result<Vec<SingularSample>> {
    read_json(path)
}

/// Writes any serializable value as pretty JSON.
pub fn write_artifact<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}

pub fn run_cover(cfg: &RunConfig) -> Result<CoverArtifact> {
    let u = read_dump(&cfg.path(FIELD_FILE))?;
    let samples = read_samples(&cfg.path(SINGULAR_FILE))?;
    let art = cover_junctions(&u, &junction_locations(&samples), &cfg.covering, &cfg.tubes)?;
    write_cover(&cfg.output, &art)?;
    Ok(art)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JunctionRow {
    pub location: Point,
    pub order: f64,
    pub labels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiSection {
    /// "ok" or "empty set".
    pub status: String,
    pub slope: Option<f64>,
    pub confidence: Option<f64>,
    pub interface_slope: Option<f64>,
    pub interface_confidence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringSection {
    pub balls: usize,
    pub packing_sum: f64,
    pub terminal: usize,
    pub dropped: usize,
    pub budget_exceeded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub source: String,
    pub dim: usize,
    pub spacing: f64,
    pub eigenvalues: Vec<f64>,
    pub junctions: Vec<JunctionRow>,
    pub wall_samples: usize,
    pub wall_order_range: Option<[f64; 2]>,
    pub detector_agreement: f64,
    pub minkowski: MinkowskiSection,
    pub covering: Option<CoveringSection>,
    pub monotonicity_violations: usize,
    pub max_monotonicity_violation: f64,
    pub identities: IdentityMaxima,
    pub lambda_hat: f64,
    pub lambda_hat_phi: f64,
    pub comparison_constant: f64,
    pub clearing_threshold: f64,
    pub clearing_violations: usize,
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.4}"))
}

impl Summary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "source: {} (dim {}, h = {:.6})", self.source, self.dim, self.spacing);
        let _ = writeln!(s, "eigenvalues: {:?}", self.eigenvalues.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>());
        let _ = writeln!(s, "junctions: {}", self.junctions.len());
        for j in &self.junctions {
            let _ = writeln!(
                s,
                "  ({:+.5}, {:+.5}, {:+.5})  order {:.4}  labels {:?}",
                j.location[0], j.location[1], j.location[2], j.order, j.labels
            );
        }
        let range = self
            .wall_order_range
            .map_or("-".into(), |[a, b]| format!("[{a:.4}, {b:.4}]"));
        let _ = writeln!(s, "wall samples: {}  order range {range}", self.wall_samples);
        let _ = writeln!(s, "detector agreement: {:.4}", self.detector_agreement);
        let m = &self.minkowski;
        let _ = writeln!(
            s,
            "minkowski: {}  junction slope {} ± {}  interface slope {} ± {}",
            m.status,
            opt(m.slope),
            opt(m.confidence),
            opt(m.interface_slope),
            opt(m.interface_confidence)
        );
        match &self.covering {
            Some(c) => {
                let _ = writeln!(
                    s,
                    "covering: {} balls ({} terminal, {} dropped), packing sum {:.4}{}",
                    c.balls,
                    c.terminal,
                    c.dropped,
                    c.packing_sum,
                    if c.budget_exceeded { ", budget exceeded" } else { "" }
                );
            }
            None => {
                let _ = writeln!(s, "covering: empty set");
            }
        }
        let _ = writeln!(
            s,
            "monotonicity violations: {} (max {:.3e})",
            self.monotonicity_violations, self.max_monotonicity_violation
        );
        let i = &self.identities;
        let _ = writeln!(
            s,
            "identity residuals: dirichlet {:.3e}  smoothed dirichlet {:.3e}  smoothed height {:.3e}  height {:.3e}  energy {:.3e}  poincare slack {:.3e}",
            i.dirichlet_alternative,
            i.smoothed_dirichlet_alternative,
            i.smoothed_height_scaling,
            i.height_scaling,
            i.energy_scaling,
            i.poincare_min_slack
        );
        let _ = writeln!(
            s,
            "constants: lambda_hat {:.4}  lambda_hat_phi {:.4}  C_hat {:.4}  eps_clear {:.4} ({} clearing violations)",
            self.lambda_hat, self.lambda_hat_phi, self.comparison_constant, self.clearing_threshold, self.clearing_violations
        );
        s
    }
}

/// Collects the upstream artifacts into `summary.json` and `summary.txt`.
pub fn run_report(cfg: &RunConfig) -> Result<Summary> {
    let analysis: AnalysisReport = read_json(&cfg.path(ANALYSIS_FILE))?;
    let samples: Vec<SingularSample> = read_json(&cfg.path(SINGULAR_FILE))?;
    let cover: CoverArtifact = read_json(&cfg.path(COVERING_FILE))?;
    let junctions: Vec<JunctionRow> = samples
        .iter()
        .filter(|s| s.classification == Classification::Junction)
        .map(|s| JunctionRow {
            location: s.location,
            order: s.order,
            labels: s.labels.clone(),
        })
        .collect();
    let walls: Vec<f64> = samples
        .iter()
        .filter(|s| s.classification == Classification::Wall)
        .map(|s| s.order)
        .collect();
    let wall_order_range = (!walls.is_empty()).then(|| {
        [
            walls.iter().copied().fold(f64::INFINITY, f64::min),
            walls.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ]
    });
    let minkowski = MinkowskiSection {
        status: if cover.junction_tube.is_some() { "ok".into() } else { "empty set".into() },
        slope: cover.junction_tube.as_ref().and_then(|c| c.slope),
        confidence: cover.junction_tube.as_ref().and_then(|c| c.confidence),
        interface_slope: cover.interface_tube.as_ref().and_then(|c| c.slope),
        interface_confidence: cover.interface_tube.as_ref().and_then(|c| c.confidence),
    };
    let covering = cover.covering.as_ref().map(|c| CoveringSection {
        balls: c.balls.len(),
        packing_sum: c.packing_sum(),
        terminal: c.balls.iter().filter(|b| b.reason == StopReason::TerminalScale).count(),
        dropped: c.balls.iter().filter(|b| b.reason == StopReason::FrequencyDrop).count(),
        budget_exceeded: c.budget_exceeded,
    });
    let summary = Summary {
        source: analysis.source.clone(),
        dim: analysis.dim,
        spacing: analysis.spacing,
        eigenvalues: analysis.eigenvalues.clone(),
        junctions,
        wall_samples: walls.len(),
        wall_order_range,
        detector_agreement: analysis.detector_agreement,
        minkowski,
        covering,
        monotonicity_violations: analysis.monotonicity_violations,
        max_monotonicity_violation: analysis.max_monotonicity_violation,
        identities: analysis.identities.clone(),
        lambda_hat: analysis.lambda_hat,
        lambda_hat_phi: analysis.lambda_hat_phi,
        comparison_constant: analysis.comparison_constant,
        clearing_threshold: analysis.clearing.threshold,
        clearing_violations: analysis.clearing.violations,
    };
    write_json(&cfg.path(SUMMARY_FILE), &summary)?;
    let text = summary.to_text();
    fs::write(cfg.path(SUMMARY_TEXT_FILE), &text).map_err(|e| Error::io(cfg.path(SUMMARY_TEXT_FILE), e))?;
    Ok(summary)
}

/// Outcome of a staged run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    /// None when no solve stage ran.
    pub converged: Option<bool>,
    pub summary: Option<Summary>,
}

impl RunOutcome {
    /// 0 on success, 2 when the solve hit max_iters.
    pub fn exit_code(&self) -> i32 {
        if self.converged == Some(false) {
            2
        } else {
            0
        }
    }
}

/// Runs the configured stages in order.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    ensure_dir(&cfg.output)?;
    let mut out = RunOutcome {
        converged: None,
        summary: None,
    };
    for stage in &cfg.stages {
        log::info!("stage {stage:?}");
        match stage {
            Stage::Solve => out.converged = Some(run_solve(cfg)?),
            Stage::Analyze => {
                run_analyze(cfg)?;
            }
            Stage::Cover => {
                run_cover(cfg)?;
            }
            Stage::Report => out.summary = Some(run_report(cfg)?),
        }
    }
    Ok(out)
}

/// Reads a solve report written by [`run_solve`].
pub fn read_solve_report(dir: &Path) -> Result<SolveReport> {
    read_json(&dir.join(SOLVE_REPORT_FILE))
}
