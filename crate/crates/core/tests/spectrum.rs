use std::f64::consts::PI;

use eigenmap_core::mesh::*;
use eigenmap_core::spectrum::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn multiplicity_at(spec: &SpectrumResult<f64>, index: usize, tol: f64) -> usize {
    let ids = spec.clusters(tol);
    ids.iter().filter(|&&i| i == ids[index]).count()
}

#[test]
fn unit_cube_first_cluster() {
    let (m, g) = build_flat_torus::<f64>(&[1.0, 1.0, 1.0], &[12, 12, 12]).unwrap();
    let spec = laplace_spectrum(&m, &g, 16).unwrap();
    assert!(spec.values[0].abs() < 1e-8);
    assert!(spec.values.windows(2).all(|w| w[0] <= w[1]));
    assert!(spec.orthonormality_defect() < 1e-8);
    for tol in [0.02, 0.05] {
        assert_eq!(multiplicity_at(&spec, 1, tol), 6);
    }
    let target = 4.0 * PI * PI;
    for v in &spec.values[1..7] {
        assert!((v - target).abs() < 0.03 * target, "{v}");
    }
    // the constant mode
    let x = &spec.vectors[0];
    let mean = x.iter().zip(&spec.mass).map(|(a, m)| a * m).sum::<f64>();
    let corr = mean.abs() / spec.mass.iter().sum::<f64>().sqrt();
    assert!(corr > 1.0 - 1e-6);
}

#[test]
fn translation_invariance_gives_exact_fourier_modes() {
    // on a uniform Kuhn grid every lattice Fourier mode is an exact
    // eigenvector, with eigenvalue computable from a single cell stencil
    let (m, g) = build_flat_torus::<f64>(&[1.0, 1.0], &[10, 10]).unwrap();
    let spec = laplace_spectrum(&m, &g, 8).unwrap();
    let ops = assemble_operators(&m, &g).unwrap();
    let mode: Vec<f64> = (0..100)
        .map(|v| (2.0 * PI * (v % 10) as f64 / 10.0).cos())
        .collect();
    let km = ops.stiffness.apply(&mode);
    let ratio = km[3] / (ops.mass[3] * mode[3]);
    let oracle = 4.0 * 100.0 * (PI / 10.0).sin().powi(2);
    assert!((ratio - oracle).abs() < 1e-10 * oracle);
    assert!((spec.values[1] - oracle).abs() < 1e-9 * oracle);
    let report = extremality_gap_check(&spec, &[mode], oracle, 0.02).unwrap();
    assert_eq!(report.k, 1);
    assert_eq!(report.multiplicity, 4);
    assert!(report.match_residual < 1e-8);
}

#[test]
fn icosphere_first_cluster_and_coordinates() {
    let (m, g) = build_icosphere::<f64>(3).unwrap();
    let spec = laplace_spectrum(&m, &g, 10).unwrap();
    assert!(spec.values[0].abs() < 1e-8);
    assert_eq!(multiplicity_at(&spec, 1, 0.05), 3);
    for v in &spec.values[1..4] {
        assert!((v - 2.0).abs() < 0.03 * 2.0, "{v}");
    }
    let fib = m.fibration().unwrap();
    let coords: Vec<Vec<f64>> = (0..3)
        .map(|a| (0..m.num_vertices()).map(|f| fib.position(f)[a]).collect())
        .collect();
    let report = extremality_gap_check(&spec, &coords, 2.0, 0.02).unwrap();
    assert_eq!((report.k, report.multiplicity), (1, 3));
    assert!(report.match_residual < 1e-3, "{}", report.match_residual);
    assert!(report.gap_below.unwrap() > 0.0 && report.gap_above.unwrap() > 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise: Vec<f64> = (0..m.num_vertices())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let report = extremality_gap_check(&spec, &[noise], 2.0, 0.02).unwrap();
    assert!(report.match_residual > 0.5);
}

#[test]
fn candidate_above_computed_range() {
    let (m, g) = build_icosphere::<f64>(1).unwrap();
    let spec = laplace_spectrum(&m, &g, 4).unwrap();
    let err = extremality_gap_check(&spec, &[vec![1.0; m.num_vertices()]], 50.0, 0.02).unwrap_err();
    assert_eq!(err.name(), "SpectrumTooShallow");
    // the top cluster is cut off, so its upper gap is unknown
    let top = *spec.values.last().unwrap();
    let report = extremality_gap_check(&spec, &[vec![1.0; m.num_vertices()]], top, 0.02).unwrap();
    assert!(report.gap_above.is_none());
}

#[test]
fn normalized_functional_is_scale_free() {
    let (m, g) = build_flat_torus::<f64>(&[1.0, 1.0, 1.0], &[6, 6, 6]).unwrap();
    let a = eigenvalue_functional(&m, &g, 1).unwrap();
    let b = eigenvalue_functional(&m, &g.scaled(3.7), 1).unwrap();
    assert!((a - b).abs() < 1e-10 * a);
    assert!(eigenvalue_functional(&m, &g, 0).unwrap().abs() < 1e-8);
    let (mt, gt) = build_flat_torus::<f64>(&[1.0, 1.0, 1.0], &[12, 12, 12]).unwrap();
    let l1 = eigenvalue_functional(&mt, &gt, 1).unwrap();
    assert!((l1 - 4.0 * PI * PI).abs() < 0.03 * 4.0 * PI * PI);
}

#[test]
fn identity_mapping_torus_matches_flat_torus() {
    let (f, gf) = build_flat_torus::<f64>(&[1.0, 1.0], &[5, 5]).unwrap();
    let (mt, gt) = build_mapping_torus((&f, &gf), &identity_permutation(25), 5).unwrap();
    let (m3, g3) = build_flat_torus::<f64>(&[1.0, 1.0, 1.0], &[5, 5, 5]).unwrap();
    let a = laplace_spectrum(&mt, &gt, 12).unwrap();
    let b = laplace_spectrum(&m3, &g3, 12).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-10 * y.max(1.0));
    }
}

#[test]
fn spectrum_csv_and_gap_row() {
    let (m, g) = build_icosphere::<f64>(1).unwrap();
    let spec = laplace_spectrum(&m, &g, 5).unwrap();
    let csv = spec.to_csv(0.02);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,eigenvalue,cluster_id,residual"));
    assert_eq!(csv.lines().count(), 6);
    let coords: Vec<Vec<f64>> = (0..3)
        .map(|a| {
            (0..m.num_vertices())
                .map(|f| m.fibration().unwrap().position(f)[a])
                .collect()
        })
        .collect();
    let report = extremality_gap_check(&spec, &coords, spec.values[1], 0.05).unwrap();
    assert_eq!(report.csv_row().split(',').count(), 5);
    assert!(report.has_strict_gap());
}

#[test]
fn invalid_requests() {
    let (m, g) = build_icosphere::<f64>(0).unwrap();
    assert_eq!(
        laplace_spectrum(&m, &g, 0).unwrap_err().name(),
        "EigensolverFailure"
    );
    assert_eq!(
        laplace_spectrum(&m, &g, 12).unwrap_err().name(),
        "EigensolverFailure"
    );
    let spec = laplace_spectrum(&m, &g, 11).unwrap();
    assert!(spec.values.iter().all(|v| *v >= -1e-10));
}
