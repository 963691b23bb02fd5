use nalgebra::{DMatrix, SymmetricEigen};
use optpart::solver::{extremality_check, objective_energy, solve_partition, SolveConfig};
use optpart::{make_oracle, Domain, Grid, OracleSpec, SegregatedField};

fn assert_disjoint(u: &SegregatedField) {
    for i in 0..u.grid().len() {
        let positive = u.components().iter().filter(|c| c[i] > 0.0).count();
        assert!(positive <= 1, "node {i} carries {positive} supports");
    }
}

fn assert_monotone(history: &[f64]) {
    for w in history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "objective rose from {} to {}", w[0], w[1]);
    }
}

/// Ground state of the Dirichlet 5-point Laplacian on the interior nodes.
fn dense_ground_state(grid: &Grid) -> (f64, Vec<f64>) {
    let h2 = grid.spacing() * grid.spacing();
    let unknowns: Vec<usize> = (0..grid.len()).filter(|&i| grid.is_interior(i)).collect();
    let mut slot = vec![usize::MAX; grid.len()];
    for (s, &i) in unknowns.iter().enumerate() {
        slot[i] = s;
    }
    let n = unknowns.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (s, &i) in unknowns.iter().enumerate() {
        a[(s, s)] = 2.0 * grid.dim() as f64 / h2;
        for j in grid.axis_neighbors(i).into_iter().flatten() {
            if slot[j] != usize::MAX {
                a[(s, slot[j])] = -1.0 / h2;
            }
        }
    }
    let eig = SymmetricEigen::new(a);
    let (idx, lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
    let col = eig.eigenvectors.column(idx);
    let sign = if col.sum() < 0.0 { -1.0 } else { 1.0 };
    let mut full = vec![0.0; grid.len()];
    for (s, &i) in unknowns.iter().enumerate() {
        full[i] = sign * col[s];
    }
    let w = grid.weights();
    let norm = full.iter().zip(w).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
    full.iter_mut().for_each(|v| *v /= norm);
    (lam, full)
}

#[test]
fn single_component_matches_dense_eigensolve_on_the_disk() {
    let cfg = SolveConfig {
        components: 1,
        domain: Domain::unit_disk(),
        spacing: 1.0 / 16.0,
        coarsest_cells: 8,
        ..Default::default()
    };
    let (u, rep) = solve_partition(&cfg).unwrap();
    let (lam, v) = dense_ground_state(u.grid());
    assert!((rep.eigenvalues[0] - lam).abs() < 1e-2 * lam, "{} vs {lam}", rep.eigenvalues[0]);
    let w = u.grid().weights();
    let err: f64 = u.components()[0]
        .iter()
        .zip(&v)
        .zip(w)
        .map(|((a, b), w)| w * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    assert!(err < 1e-2, "L2 distance {err}");
}

#[test]
fn three_partition_of_the_disk() {
    let (u, rep) = solve_partition(&SolveConfig::default()).unwrap();
    assert!(rep.converged);
    assert_disjoint(&u);
    assert_monotone(&rep.objective_history);
    for level in &rep.levels {
        assert_monotone(&level.objective_history);
    }
    for r in &rep.residuals {
        assert!(*r < 1e-3, "{:?}", rep.residuals);
    }
    for n in u.l2_norms() {
        assert!((n - 1.0).abs() < 1e-10);
    }
    // Σ λ_k agrees with the discrete energy of the signed functions.
    let e = objective_energy(&u).unwrap();
    assert!((e - rep.objective).abs() < 2e-2 * rep.objective, "{e} vs {}", rep.objective);
    let h = u.grid().spacing();
    let ext = extremality_check(&u, 10.0 * h);
    assert_eq!(ext.violations(), 0, "{ext:?}");
}

#[test]
fn two_half_plane_oracle_has_no_extremality_violations() {
    let h = 1.0 / 64.0;
    let g = Grid::from_domain(Domain::rectangle(&[-1.0, -1.0], &[1.0, 1.0]), h).unwrap();
    let u = make_oracle(&g, &OracleSpec::new(2, [0.0; 3]).rotated(0.3)).unwrap();
    assert_eq!(extremality_check(&u, 10.0 * h).violations(), 0);
}

#[test]
fn overlapping_iterate_reports_violations() {
    let h = 1.0 / 16.0;
    let g = Grid::from_domain(Domain::unit_square(), h).unwrap();
    let bump: Vec<f64> = (0..g.len())
        .map(|i| {
            let p = g.coords(i);
            if g.is_interior(i) {
                (std::f64::consts::PI * p[0]).sin() * (std::f64::consts::PI * p[1]).sin()
            } else {
                0.0
            }
        })
        .collect();
    let rep = optpart::solver::extremality_check_raw(&g, &[bump.clone(), bump], &[0.0, 0.0], 1.0);
    assert!(rep.violations() > 0);
}

#[test]
fn same_seed_same_field() {
    let cfg = SolveConfig {
        components: 3,
        spacing: 1.0 / 64.0,
        seed: 11,
        ..Default::default()
    };
    let (a, _) = solve_partition(&cfg).unwrap();
    let (b, _) = solve_partition(&cfg).unwrap();
    assert_eq!(a.components(), b.components());
}
