//! Junctions and walls of a solved 3-partition of the disk, with vanishing
//! orders and the agreement between the order and label detectors.

use optpart::singular::{detect, Classification, DetectConfig};
use optpart::solver::{solve_partition, SolveConfig};

fn main() -> optpart::Result<()> {
    let (u, _) = solve_partition(&SolveConfig::default())?;
    let d = detect(&u, &DetectConfig::default())?;
    println!(
        "{} interface cells, {} junction candidates, {} samples",
        d.interface_cells,
        d.junction_candidates,
        d.samples.len()
    );
    for s in d.samples.iter().filter(|s| s.classification == Classification::Junction) {
        println!("junction at ({:+.5}, {:+.5}) order {:.4}", s.location[0], s.location[1], s.order);
    }
    let orders: Vec<f64> = d.walls().map(|s| s.order).collect();
    if !orders.is_empty() {
        let lo = orders.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = orders.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("{} wall points, orders in [{lo:.4}, {hi:.4}]", orders.len());
    }
    println!("detector agreement {:.1}%", 100.0 * d.agreement());
    Ok(())
}
