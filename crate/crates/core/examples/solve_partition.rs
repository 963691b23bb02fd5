//! Solve the 3-partition of the unit disk and print the per-level history.
//!
//! `cargo run --example solve_partition -- [components] [1/h]`

use optpart::solver::{solve_partition, SolveConfig};
use optpart::Domain;

fn main() -> optpart::Result<()> {
    let mut args = std::env::args().skip(1);
    let components = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let inv: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(128.0);
    let cfg = SolveConfig {
        components,
        domain: Domain::unit_disk(),
        spacing: 1.0 / inv,
        ..Default::default()
    };
    let (u, report) = solve_partition(&cfg)?;
    for level in &report.levels {
        println!(
            "h = {:.5}  steps {:5}  rejected {:3}  objective {:.6}",
            level.spacing,
            level.steps,
            level.rejected,
            level.objective_history.last().copied().unwrap_or(f64::NAN)
        );
    }
    println!("eigenvalues {:?}", report.eigenvalues);
    println!("PDE residuals {:?}", report.residuals);
    println!("lambda_max {:.6}, converged {}", u.lambda_max(), report.converged);
    Ok(())
}
