use optpart::flatness::{spine_tube_check, AffinePlane};
use optpart::singular::{
    classify_point, clearing_check, clearing_sweep, detect, extract_interface, junction_candidates,
    label_counts, vanishing_order, Classification, DetectConfig, SingularSample,
};
use optpart::{make_oracle, Domain, Grid, OracleSpec, SegregatedField};

fn oracle_2d(m: usize, h: f64) -> SegregatedField {
    let g = Grid::from_domain(Domain::rectangle(&[-1.0, -1.0], &[1.0, 1.0]), h).unwrap();
    make_oracle(&g, &OracleSpec::new(m, [0.0; 3]).rotated(0.21)).unwrap()
}

fn oracle_3d(h: f64) -> SegregatedField {
    let g = Grid::from_domain(Domain::rectangle(&[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0]), h).unwrap();
    make_oracle(&g, &OracleSpec::new(3, [0.0; 3])).unwrap()
}

#[test]
fn vanishing_order_is_resolution_independent_on_oracles() {
    for m in 2..=5 {
        let coarse = vanishing_order(&oracle_2d(m, 1.0 / 64.0), &[0.0; 3]).unwrap();
        let fine = vanishing_order(&oracle_2d(m, 1.0 / 128.0), &[0.0; 3]).unwrap();
        let exact = m as f64 / 2.0;
        assert!((coarse - exact).abs() < 0.05, "m = {m}: {coarse}");
        assert!((fine - coarse).abs() < 1e-9, "m = {m}: {coarse} vs {fine}");
    }
}

#[test]
fn labels_around_the_m3_vertex() {
    let h = 1.0 / 64.0;
    let u = oracle_2d(3, h);
    let labels = u.labels();
    let counts = label_counts(u.grid(), &labels, &[0.0; 3], 8.0 * h);
    assert_eq!(counts.len(), 3, "{counts:?}");
    assert!(counts.values().all(|&n| n > 50), "{counts:?}");
    let cells = extract_interface(&u);
    assert!(!cells.is_empty());
    for c in &cells {
        assert!(c.labels.iter().collect::<std::collections::BTreeSet<_>>().len() >= 2);
    }
}

#[test]
fn spine_of_the_three_dimensional_oracle() {
    let h = 1.0 / 16.0;
    let u = oracle_3d(h);
    let cands = junction_candidates(&u, 4.0 * h).unwrap();
    assert!(!cands.is_empty());
    for c in &cands {
        assert!(c[1].hypot(c[2]) <= 2.0 * h, "{c:?} off the spine");
    }
    let lo = cands.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min);
    let hi = cands.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max);
    assert!(lo < -0.6 && hi > 0.6, "candidates span [{lo}, {hi}] only");
}

#[test]
fn classification_in_three_dimensions() {
    let h = 1.0 / 32.0;
    let u = oracle_3d(h);
    let s = classify_point(&u, &[0.1, 0.0, 0.0]).unwrap();
    assert_eq!(s.classification, Classification::Junction);
    assert!((s.order - 1.5).abs() < 0.05, "{}", s.order);
    let spine = AffinePlane {
        point: [0.0; 3],
        directions: vec![[1.0, 0.0, 0.0]],
    };
    let on = SingularSample { location: [0.1, 0.0, 0.0], ..s.clone() };
    let off = SingularSample { location: [-0.2, 0.5 * h, 0.0], ..s.clone() };
    let wall = SingularSample {
        location: [0.0, 0.9, 0.0],
        classification: Classification::Wall,
        ..s.clone()
    };
    let samples = vec![on, off, wall];
    let tube = spine_tube_check(&samples, &spine, &[0.0; 3], 0.5, 4.0 * h);
    assert_eq!(tube.checked, 2);
    assert!(tube.violators.is_empty());
    let exact = spine_tube_check(&samples, &spine, &[0.0; 3], 0.5, 0.0);
    assert_eq!(exact.violators, vec![[-0.2, 0.5 * h, 0.0]]);
}

#[test]
fn clearing_on_oracles() {
    let h = 1.0 / 128.0;
    let u = oracle_2d(2, h);
    // A point on the wall has I_φ near 1, so the check is vacuous.
    let wall = [0.0; 3];
    let rep = clearing_check(&u, &wall, 0.1, 0.2).unwrap();
    assert!(!rep.applies && rep.holds(), "{rep:?}");
    let u = oracle_2d(3, h);
    let mut pts = Vec::new();
    for i in -4..=4 {
        for j in -4..=4 {
            pts.push([0.1 * i as f64, 0.1 * j as f64, 0.0]);
        }
    }
    let (reports, threshold) = clearing_sweep(&u, &pts, 16.0 * h, 0.2).unwrap();
    assert!(reports.iter().all(|r| r.holds()));
    assert!(threshold >= 0.2, "{threshold}");
}

#[test]
fn detection_config_rejects_unknown_fields() {
    assert!(serde_json::from_str::<DetectConfig>(r#"{"snap": false}"#).is_ok());
    assert!(serde_json::from_str::<DetectConfig>(r#"{"snapp": false}"#).is_err());
}

#[test]
fn two_sector_oracle_has_only_walls() {
    let d = detect(&oracle_2d(2, 1.0 / 64.0), &DetectConfig::default()).unwrap();
    assert_eq!(d.junctions().count(), 0);
    assert!(d.walls().count() > 0);
    for s in d.walls() {
        assert!((s.order - 1.0).abs() < 0.1, "{s:?}");
    }
    assert_eq!(d.agreement(), 1.0);
}
