use std::f64::consts::PI;

use optpart::dump::{read_dump, read_header, sidecar_path, write_dump};
use optpart::{make_oracle, project_to_sigma, Domain, Grid, OracleSpec, SegregatedField};
use proptest::prelude::*;

fn on_sigma(y: &[f64]) -> bool {
    y.iter().all(|&v| v >= 0.0) && y.iter().filter(|&&v| v > 0.0).count() <= 1
}

fn assert_sigma_everywhere(u: &SegregatedField) {
    let grid = u.grid();
    for i in 0..grid.len() {
        let y: Vec<f64> = u.components().iter().map(|c| c[i]).collect();
        assert!(on_sigma(&y), "node {i}: {y:?}");
        if !grid.domain_mask()[i] {
            assert!(y.iter().all(|&v| v == 0.0), "node {i} outside the domain: {y:?}");
        }
    }
}

fn single_branch(len: usize) -> impl Strategy<Value = Vec<f64>> {
    (0..len, 0.0..3.0f64).prop_map(move |(k, v)| {
        let mut y = vec![0.0; len];
        y[k] = v;
        y
    })
}

proptest! {
    #[test]
    fn projection_is_idempotent(y in prop::collection::vec(-2.0..2.0f64, 1..7)) {
        let p = project_to_sigma(&y);
        prop_assert!(on_sigma(&p));
        prop_assert_eq!(project_to_sigma(&p), p);
    }

    #[test]
    fn projection_is_nonexpansive_on_sigma(
        (y, z) in (1usize..6).prop_flat_map(|n| (single_branch(n), single_branch(n)))
    ) {
        let d = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(s, t)| (s - t) * (s - t)).sum::<f64>().sqrt()
        };
        let (py, pz) = (project_to_sigma(&y), project_to_sigma(&z));
        prop_assert!(d(&py, &pz) <= d(&y, &z) + 1e-15);
    }

    #[test]
    fn oracle_fields_lie_on_sigma(m in 2usize..6, rot in 0.0..6.3f64) {
        let g = Grid::from_domain(Domain::unit_disk(), 1.0 / 24.0).unwrap();
        let u = make_oracle(&g, &OracleSpec::new(m, [0.0; 3]).rotated(rot)).unwrap();
        assert_sigma_everywhere(&u);
    }

    #[test]
    fn interpolated_values_lie_on_sigma(x in -0.9..0.9f64, y in -0.9..0.9f64) {
        let g = Grid::from_domain(Domain::rectangle(&[-1.0, -1.0], &[1.0, 1.0]), 1.0 / 16.0).unwrap();
        let u = make_oracle(&g, &OracleSpec::new(4, [0.0; 3]).rotated(0.2)).unwrap();
        prop_assert!(on_sigma(&u.eval(&[x, y, 0.0]).unwrap()));
    }
}

#[test]
fn tie_goes_to_lowest_index() {
    assert_eq!(project_to_sigma(&[0.5, 0.5, 0.1]), vec![0.5, 0.0, 0.0]);
    assert_eq!(project_to_sigma(&[-1.0, -0.5]), vec![0.0, 0.0]);
}

#[test]
fn oracle_is_homogeneous_under_interpolation() {
    let h = 1.0 / 128.0;
    let g = Grid::from_domain(Domain::rectangle(&[-1.0, -1.0], &[1.0, 1.0]), h).unwrap();
    let u = make_oracle(&g, &OracleSpec::new(3, [0.0; 3]).rotated(0.37)).unwrap();
    let modulus = |p: [f64; 3]| u.eval(&p).unwrap().iter().copied().fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for i in 0..60 {
        let t = 0.1 * i as f64;
        let y = [0.4 * (1.3 * t).cos(), 0.4 * (0.7 * t + 1.0).sin(), 0.0];
        for rho in [0.5, 1.5, 2.0] {
            let a = modulus([rho * y[0], rho * y[1], 0.0]);
            let b = modulus(y);
            worst = worst.max((a - rho.powf(1.5) * b).abs());
        }
    }
    // |∇u| ≤ 1.5 r^{1/2} ≤ 1.5 on these points; a cell-sized error in the
    // wall position costs O(h |∇u|).
    assert!(worst < 2.0 * h, "{worst}");
}

#[test]
fn oracle_sector_norm_matches_closed_form() {
    // ∫_{sector} r³ cos²(3θ/2) = (1/5)(π/3).
    let g = Grid::from_domain(Domain::unit_disk(), 1.0 / 256.0).unwrap();
    let u = make_oracle(&g, &OracleSpec::new(3, [0.0; 3])).unwrap();
    let exact = (PI / 15.0).sqrt();
    for norm in u.l2_norms() {
        assert!((norm - exact).abs() < 1e-3 * exact, "{norm} vs {exact}");
    }
    let zero = SegregatedField::new(g.clone(), vec![vec![0.0; g.len()]; 2], vec![0.0; 2], true).unwrap();
    assert_eq!(zero.l2_norms(), vec![0.0, 0.0]);
}

#[test]
fn blowups_of_a_homogeneous_field_agree() {
    let g = Grid::from_domain(Domain::rectangle(&[-1.0, -1.0], &[1.0, 1.0]), 1.0 / 128.0).unwrap();
    let u = make_oracle(&g, &OracleSpec::new(3, [0.0; 3]).rotated(0.2)).unwrap();
    let a = u.blowup(&[0.0; 3], 0.4, 16).unwrap();
    let b = u.blowup(&[0.0; 3], 0.8, 16).unwrap();
    let w = a.grid().weights();
    let vol: f64 = w.iter().sum();
    let mut err = 0.0;
    for k in 0..3 {
        for i in 0..w.len() {
            let d = a.components()[k][i] - b.components()[k][i];
            err += w[i] * d * d;
        }
    }
    assert!((err / vol).sqrt() < 1e-2, "{}", (err / vol).sqrt());
    let mass: f64 = (0..w.len())
        .map(|i| w[i] * a.components().iter().map(|c| c[i] * c[i]).sum::<f64>())
        .sum();
    assert!((mass / vol - 1.0).abs() < 1e-10);
}

#[test]
fn dump_roundtrip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::from_domain(Domain::ball(&[0.0, 0.0, 0.0], 1.0), 1.0 / 12.0).unwrap();
    let u = make_oracle(&g, &OracleSpec::new(3, [0.0; 3]).rotated(0.1)).unwrap();
    let path = dir.path().join("f.sgf");
    write_dump(&u, &path).unwrap();
    assert!(sidecar_path(&path).exists());
    let header = read_header(&path).unwrap();
    assert_eq!(header.dim, 3);
    assert_eq!(header.n_components, 3);
    let back = read_dump(&path).unwrap();
    assert_eq!(back.grid(), u.grid());
    for (a, b) in back.components().iter().zip(u.components()) {
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(back.eigenvalues(), u.eigenvalues());
    assert_eq!(back.is_dirichlet(), u.is_dirichlet());
}

#[test]
fn missing_dump_is_a_missing_artifact() {
    let err = read_dump(std::path::Path::new("/nonexistent/field.sgf")).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}
