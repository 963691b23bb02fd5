//! Frequency-drop covering of the detected junctions, plus the Reifenberg
//! integral of their counting measure.

use optpart::covering::{inductive_cover, reifenberg_integral, CoverConfig};
use optpart::flatness::PointMeasure;
use optpart::singular::{detect, DetectConfig};
use optpart::solver::{solve_partition, SolveConfig};

fn main() -> optpart::Result<()> {
    let (u, _) = solve_partition(&SolveConfig::default())?;
    let junctions: Vec<_> = detect(&u, &DetectConfig::default())?
        .junctions()
        .map(|s| s.location)
        .collect();
    let cover = inductive_cover(&u, &junctions, &CoverConfig::default())?;
    for b in &cover.balls {
        println!(
            "ball at ({:+.4}, {:+.4}) r = {:.4} gen {} stop {:?} sup I_phi {:?}",
            b.center[0], b.center[1], b.radius, b.generation, b.reason, b.sup_frequency
        );
    }
    println!(
        "packing sum {:.4} (bound {:.1}), covers {}, Vitali {}",
        cover.packing_sum(),
        cover.upper_bound,
        cover.covers(&junctions),
        cover.vitali_disjoint()
    );
    let mu = PointMeasure::unit_masses(2, &junctions)?;
    println!("Reifenberg integral (k = 0) {:.3e}", reifenberg_integral(&mu, &[0.0; 3], 0.5, 0)?);
    Ok(())
}
