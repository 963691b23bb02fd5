//! Classical and smoothed frequency of the homogeneous m-oracles at their
//! vertex; both should equal m/2 at every radius.

use optpart::frequency::{frequency_profile, geometric_radii};
use optpart::{make_oracle, Domain, Grid, OracleSpec};

fn main() -> optpart::Result<()> {
    let h = 1.0 / 256.0;
    let grid = Grid::from_domain(Domain::rectangle(&[-1.0, -1.0], &[1.0, 1.0]), h)?;
    let radii = geometric_radii(8.0 * h, 0.25, 8);
    for m in 2..=5 {
        let u = make_oracle(&grid, &OracleSpec::new(m, [0.0; 3]).rotated(0.3))?;
        let profile = frequency_profile(&u, &[0.0; 3], &radii, 0.0)?;
        let exact = m as f64 / 2.0;
        let worst = profile
            .classical()
            .iter()
            .chain(profile.smoothed().iter())
            .map(|v| (v - exact).abs())
            .fold(0.0, f64::max);
        println!("m = {m}: I ranges over {:?}", profile.classical());
        println!("       worst deviation from {exact} is {worst:.2e}");
    }
    Ok(())
}
