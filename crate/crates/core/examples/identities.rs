//! Differentiation identities of D, H and their smoothed versions, checked by
//! central differences on an m = 3 oracle at two resolutions.

use optpart::frequency::identity_suite;
use optpart::{make_oracle, Domain, Grid, OracleSpec};

fn main() -> optpart::Result<()> {
    for inv in [128.0, 256.0] {
        let grid = Grid::from_domain(Domain::rectangle(&[-0.5, -0.5], &[0.5, 0.5]), 1.0 / inv)?;
        let u = make_oracle(&grid, &OracleSpec::new(3, [0.0; 3]).rotated(0.37))?;
        let report = identity_suite(&u, &[0.0; 3], 0.2)?;
        println!("h = 1/{inv}");
        for id in [
            &report.dirichlet_alternative,
            &report.height_scaling,
            &report.energy_scaling,
            &report.smoothed_dirichlet_alternative,
            &report.smoothed_height_scaling,
        ] {
            println!("  {:32} lhs {:+.6e}  rhs {:+.6e}  rel {:.2e}", id.name, id.lhs, id.rhs, id.relative);
        }
        println!(
            "  poincare: {:.6e} <= {:.6e} (slack {:.3e})",
            report.poincare_lhs, report.poincare_rhs, report.poincare_slack
        );
    }
    Ok(())
}
