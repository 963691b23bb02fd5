use optpart::flatness::{brute_force_flatness, mean_flatness, PointMeasure};

// The four corners of a square: no line fits them, and the best line through
// the barycenter leaves a normalized residual of 1/8 at r = 2.
fn main() -> optpart::Result<()> {
    let corners = [
        [0.5, 0.5, 0.0],
        [-0.5, 0.5, 0.0],
        [0.5, -0.5, 0.0],
        [-0.5, -0.5, 0.0],
    ];
    let mu = PointMeasure::unit_masses(2, &corners)?;
    for r in [1.0, 2.0, 4.0] {
        let rec = mean_flatness(&mu, &[0.0; 3], r, 1)?;
        let brute = brute_force_flatness(&mu, &[0.0; 3], r, 1)?;
        println!(
            "r = {r}: D = {:.8} (brute force {:.8}), eigenvalues {:?}",
            rec.flatness, brute, rec.eigenvalues
        );
    }
    let line = PointMeasure::unit_masses(2, &[[0.0, 0.0, 0.0], [0.3, 0.1, 0.0], [-0.6, -0.2, 0.0]])?;
    println!("collinear atoms: D = {:.3e}", mean_flatness(&line, &[0.0; 3], 1.0, 1)?.flatness);
    Ok(())
}
