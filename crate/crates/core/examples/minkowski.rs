//! Tube volumes of the junction set and of the interface of a solved
//! 3-partition. The fitted exponents estimate n - dim, so about 2 for isolated
//! points and 1 for curves.

use optpart::covering::{dyadic_rhos, tube_volume_curve, Region};
use optpart::singular::{detect, interface_points, DetectConfig};
use optpart::solver::{solve_partition, SolveConfig};

fn main() -> optpart::Result<()> {
    let (u, _) = solve_partition(&SolveConfig::default())?;
    let h = u.grid().spacing();
    let region = Region::Ball {
        center: [0.0; 3],
        radius: 0.5,
    };
    let rhos = dyadic_rhos(2.0 * h, 0.1);
    let junctions: Vec<_> = detect(&u, &DetectConfig::default())?
        .junctions()
        .map(|s| s.location)
        .collect();
    for (name, set) in [("junctions", junctions), ("interface", interface_points(&u))] {
        let curve = tube_volume_curve(u.grid(), &set, &region, &rhos)?;
        match (curve.slope, curve.confidence) {
            (Some(s), Some(c)) => println!("{name}: {} points, slope {s:.3} +- {c:.3}", set.len()),
            _ => println!("{name}: {} points, too few radii for a fit", set.len()),
        }
        for (rho, vol) in curve.rhos.iter().zip(&curve.volumes) {
            println!("  rho {rho:.5}  |B_rho(S) ∩ K| {vol:.4e}");
        }
    }
    Ok(())
}
