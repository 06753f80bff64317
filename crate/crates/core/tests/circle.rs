#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;
use std::time::Instant;

use eigenmap_core::circle::*;
use eigenmap_core::mesh::*;
use eigenmap_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Energy from explicit chart coordinates: solve for the Euclidean gradient
/// vector of the linear interpolant in each cell, independent of the Gram
/// matrix formulation.
fn coordinate_energy(mesh: &Mesh<f64>, theta: &Cochain1<f64>, p: f64, eps: f64) -> f64 {
    let chart = mesh.chart().unwrap();
    let n = mesh.dim();
    let mut total = 0.0;
    for c in 0..mesh.num_cells() {
        let x0 = chart.lift(n, c, 0).to_vec();
        let mut e = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let xi = chart.lift(n, c, i + 1);
            for k in 0..n {
                e[i][k] = xi[k] - x0[k];
            }
            rhs[i] = theta.on_cell_edge(mesh, c, i + 1);
        }
        let grad = solve_dense(e.clone(), rhs);
        let s: f64 = grad.iter().map(|v| v * v).sum();
        let vol = det(&e).abs() / (1..=n).product::<usize>() as f64;
        total += vol * (s + eps * eps).powf(p / 2.0);
    }
    total
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

fn det(a: &[Vec<f64>]) -> f64 {
    match a.len() {
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        _ => {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
    }
}

fn random_phi(n: usize, amp: f64, seed: u64) -> Cochain0<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Cochain0((0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect())
}

fn random_factors(cells: usize, log_amp: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cells)
        .map(|_| (log_amp * rng.gen_range(-1.0..1.0)).exp())
        .collect()
}

fn unit_t3(res: usize) -> (Mesh<f64>, MetricField<f64>) {
    build_flat_torus(&[1.0, 1.0, 1.0], &[res, res, res]).unwrap()
}

#[test]
fn linear_representative_energy_matches_closed_form() {
    let (m, g) = unit_t3(6);
    let class = class_from_winding(&m, &[1, 0, 0]).unwrap();
    let map = CircleMap::linear(class, m.num_vertices());
    let e = p_energy(&m, &g, &map, 3.0, 0.0).unwrap();
    let closed = (2.0 * PI).powi(3);
    assert!((e - closed).abs() < 1e-12 * closed);
    let oracle = coordinate_energy(&m, &map.theta(&m), 3.0, 0.0);
    assert!((e - oracle).abs() < 1e-12 * closed);
    for d in density(&m, &g, &map).unwrap() {
        assert!((d - 4.0 * PI * PI).abs() < 1e-11);
    }
    assert!((min_density(&m, &g, &map).unwrap() - 2.0 * PI).abs() < 1e-12);
}

#[test]
fn energy_agrees_with_coordinate_oracle() {
    let (m, g) = build_flat_torus::<f64>(&[1.3, 0.6], &[7, 5]).unwrap();
    let class = class_from_winding(&m, &[2, -1]).unwrap();
    for seed in 0..5 {
        let map = CircleMap::new(class.clone(), random_phi(m.num_vertices(), 1.0, seed));
        for (p, eps) in [(2.0, 0.0), (3.0, 0.1), (4.5, 1e-3)] {
            let e = p_energy(&m, &g, &map, p, eps).unwrap();
            let o = coordinate_energy(&m, &map.theta(&m), p, eps);
            assert!((e - o).abs() < 1e-11 * o, "p={p}: {e} vs {o}");
        }
    }
}

#[test]
fn periods_and_closedness_of_base_form() {
    let (m, _) = build_flat_torus::<f64>(&[1.0, 2.0, 0.5], &[4, 5, 3]).unwrap();
    let w = [1, -2, 3];
    let class = class_from_winding(&m, &w).unwrap();
    assert!(class
        .theta0()
        .face_circulations(&m)
        .iter()
        .all(|c| c.abs() < 1e-12));
    for gen in m.generators().unwrap() {
        let period: f64 = gen
            .cycle
            .windows(2)
            .map(|e| class.theta0().oriented(&m, e[0], e[1]).unwrap())
            .sum();
        assert!((period - 2.0 * PI * w[gen.axis] as f64).abs() < 1e-10);
    }

    let (f, gf) = build_crossed_torus::<f64>([1.0, 1.0], [4, 4]).unwrap();
    let (mt, _) = build_mapping_torus((&f, &gf), &crossed_torus_quarter_turn(4), 6).unwrap();
    let class = class_from_winding(&mt, &[1]).unwrap();
    assert!(class
        .theta0()
        .face_circulations(&mt)
        .iter()
        .all(|c| c.abs() < 1e-12));
    let gen = &mt.generators().unwrap()[0];
    let period: f64 = gen
        .cycle
        .windows(2)
        .map(|e| class.theta0().oriented(&mt, e[0], e[1]).unwrap())
        .sum();
    assert!((period - 2.0 * PI).abs() < 1e-10);
}

#[test]
fn conformal_invariance_at_critical_exponent() {
    let (m, g) = unit_t3(4);
    let class = class_from_winding(&m, &[1, 1, 0]).unwrap();
    let rho = random_factors(m.num_cells(), 1.0, 3);
    let g2 = conformal_scale(&g, &rho).unwrap();
    let map = CircleMap::new(class, random_phi(m.num_vertices(), 0.5, 9));
    let e1 = p_energy(&m, &g, &map, 3.0, 0.0).unwrap();
    let e2 = p_energy(&m, &g2, &map, 3.0, 0.0).unwrap();
    assert!((e1 - e2).abs() < 1e-12 * e1);
    let e4 = p_energy(&m, &g2, &map, 4.0, 0.0).unwrap();
    assert!((e4 - p_energy(&m, &g, &map, 4.0, 0.0).unwrap()).abs() > 1e-3);
}

#[test]
fn gradient_matches_central_differences() {
    let (m, g) = build_flat_torus::<f64>(&[1.0, 1.5, 0.8], &[3, 4, 3]).unwrap();
    let class = class_from_winding(&m, &[1, 0, -1]).unwrap();
    let rho = random_factors(m.num_cells(), 0.5, 1);
    let g = conformal_scale(&g, &rho).unwrap();
    let h = 1e-6;
    for seed in 0..20u64 {
        let eps = if seed % 2 == 0 { 1e-2 } else { 1e-3 };
        let phi = random_phi(m.num_vertices(), 1.0, 100 + seed);
        let map = CircleMap::new(class.clone(), phi.clone());
        let grad = p_energy_gradient(&m, &g, &map, 3.0, eps).unwrap();
        let fd: Vec<f64> = (0..m.num_vertices())
            .map(|v| {
                let mut plus = phi.clone();
                let mut minus = phi.clone();
                plus.0[v] += h;
                minus.0[v] -= h;
                let ep = p_energy(&m, &g, &CircleMap::new(class.clone(), plus), 3.0, eps).unwrap();
                let em = p_energy(&m, &g, &CircleMap::new(class.clone(), minus), 3.0, eps).unwrap();
                (ep - em) / (2.0 * h)
            })
            .collect();
        let diff: f64 = grad
            .0
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(
            diff / norm < 1e-5,
            "seed {seed}: relative error {}",
            diff / norm
        );
        let total: f64 = grad.0.iter().sum();
        assert!(total.abs() < 1e-12 * norm.max(1.0));
    }
}

#[test]
fn closed_form_minimizer_on_unit_cube() {
    let (m, g) = unit_t3(12);
    let class = class_from_winding(&m, &[1, 0, 0]).unwrap();
    let start = Instant::now();
    let (map, report) = minimize(&m, &g, &class, 3.0, &SolverOptions::default()).unwrap();
    assert!(start.elapsed().as_secs_f64() < 10.0);
    let closed = (2.0 * PI).powi(3);
    assert!((report.energy - closed).abs() < 1e-8 * closed);
    assert!(report.gradient < 1e-8);
    assert!(map.phi().0.iter().all(|v| v.abs() < 1e-8));
    assert!((report.min_density - 4.0 * PI * PI).abs() < 1e-9);
}

#[test]
fn minimizer_from_random_start_and_uniqueness() {
    let (m, g) = unit_t3(5);
    let class = class_from_winding(&m, &[0, 1, 0]).unwrap();
    let mass = lumped_mass(&m, &g);
    let opts = SolverOptions::with_tol(1e-11);
    let mut maps = Vec::new();
    for seed in 0..3 {
        let init = CircleMap::new(class.clone(), random_phi(m.num_vertices(), 1.0, seed));
        let e0 = p_energy(&m, &g, &init, 3.0, 0.0).unwrap();
        let (map, report) = minimize_from(&m, &g, &init, 3.0, &opts).unwrap();
        assert!(report.energy <= e0);
        assert!(report.trace.windows(2).all(|w| w[1].energy <= w[0].energy));
        assert!((report.energy - (2.0 * PI).powi(3)).abs() < 1e-8 * report.energy);
        maps.push(map);
    }
    for b in &maps[1..] {
        let (_, dist) = align_rotation(&maps[0], b, &mass).unwrap();
        assert!(dist <= 1e-6, "distance {dist}");
    }
}

#[test]
fn minimizer_is_conformally_invariant() {
    let (m, g) = unit_t3(5);
    let class = class_from_winding(&m, &[1, 0, 0]).unwrap();
    let rho: Vec<f64> = random_factors(m.num_cells(), 1.0, 21);
    let g2 = conformal_scale(&g, &rho).unwrap();
    // a nonlinear starting point forces a genuine solve on both metrics
    let init = CircleMap::new(class.clone(), random_phi(m.num_vertices(), 0.3, 4));
    let opts = SolverOptions::with_tol(1e-13);
    let (a, ra) = minimize_from(&m, &g, &init, 3.0, &opts).unwrap();
    let (b, rb) = minimize_from(&m, &g2, &init, 3.0, &opts).unwrap();
    assert!((ra.energy - rb.energy).abs() < 1e-10 * ra.energy);
    let (ta, tb) = (a.theta(&m), b.theta(&m));
    let diff =
        ta.0.iter()
            .zip(&tb.0)
            .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    let scale = ta.0.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    assert!(diff < 1e-10 * scale, "theta change {}", diff / scale);
}

#[test]
fn perturbed_metric_minimizer() {
    let (m, g) = unit_t3(5);
    let class = class_from_winding(&m, &[1, 0, 0]).unwrap();
    let cells: Vec<_> = g
        .cells()
        .iter()
        .enumerate()
        .map(|(c, s)| {
            let mut s = *s;
            s.set(0, 0, s.get(0, 0) * (1.0 + 0.05 * ((c % 7) as f64 / 7.0)));
            s
        })
        .collect();
    let g2 = MetricField::new(3, cells).unwrap();
    let (map, report) = minimize(&m, &g2, &class, 3.0, &SolverOptions::default()).unwrap();
    let linear = p_energy(
        &m,
        &g2,
        &CircleMap::linear(class, m.num_vertices()),
        3.0,
        0.0,
    )
    .unwrap();
    assert!(report.energy < linear);
    assert!(report.gradient <= 1e-8 * (1.0 + report.energy));
    let grad = p_energy_gradient(&m, &g2, &map, 3.0, 0.0).unwrap();
    let mass = lumped_mass(&m, &g2);
    let sup = grad
        .0
        .iter()
        .zip(&mass)
        .fold(0.0f64, |a, (g, w)| a.max(g.abs() / w));
    assert!((sup - report.gradient).abs() <= 1e-12 * (1.0 + sup));
    assert!(report.min_density > 0.0);
}

#[test]
fn zero_class_minimizes_to_constant() {
    let (m, g) = unit_t3(4);
    let class = class_from_winding(&m, &[0, 0, 0]).unwrap();
    let (map, report) = minimize(&m, &g, &class, 3.0, &SolverOptions::default()).unwrap();
    assert_eq!(report.energy, 0.0);
    assert_eq!(min_density(&m, &g, &map).unwrap(), 0.0);
}

#[test]
fn alignment() {
    let (m, g) = unit_t3(4);
    let mass = lumped_mass(&m, &g);
    let class = class_from_winding(&m, &[1, 0, 0]).unwrap();
    let a = CircleMap::new(class.clone(), random_phi(m.num_vertices(), 1.0, 5));
    let b = CircleMap::new(class, Cochain0(a.phi().0.iter().map(|v| v + 0.7).collect()));
    let (phase, dist) = align_rotation(&a, &b, &mass).unwrap();
    assert!((phase - 0.7).abs() < 1e-14);
    assert!(dist < 1e-14);
    let other = CircleMap::linear(
        class_from_winding(&m, &[0, 1, 0]).unwrap(),
        m.num_vertices(),
    );
    assert_eq!(
        align_rotation(&a, &other, &mass).unwrap_err(),
        Error::ClassMismatch
    );
}

#[test]
fn map_dump_round_trip() {
    let (m, _) = build_flat_torus::<f64>(&[1.0, 1.0], &[4, 3]).unwrap();
    let class = class_from_winding(&m, &[2, -1]).unwrap();
    let map = CircleMap::new(class, random_phi(m.num_vertices(), 2.0, 8));
    let text = map.dump();
    assert!(text.starts_with("winding 2 -1\n0 "));
    assert_eq!(CircleMap::load(&m, &text).unwrap(), map);
    assert_eq!(CircleMap::load(&m, "phi 1\n").unwrap_err().name(), "Parse");
}

#[test]
fn components_are_unit_and_periodic() {
    let (m, _) = build_flat_torus::<f64>(&[1.0, 1.0], &[6, 6]).unwrap();
    let class = class_from_winding(&m, &[1, 2]).unwrap();
    let map = CircleMap::new(class, random_phi(m.num_vertices(), 0.4, 2));
    let [c, s] = map.components(&m);
    for v in 0..m.num_vertices() {
        assert!((c[v] * c[v] + s[v] * s[v] - 1.0).abs() < 1e-14);
    }
    let alpha = map.angles(&m);
    let theta = map.theta(&m);
    for (e, [a, b]) in m.edges().iter().enumerate() {
        let jump = alpha[*b] - alpha[*a] - theta.0[e];
        let k = (jump / (2.0 * PI)).round();
        assert!((jump - 2.0 * PI * k).abs() < 1e-12);
    }
}

#[test]
fn single_precision_energy() {
    let (m, g) = build_flat_torus::<f32>(&[1.0, 1.0], &[6, 6]).unwrap();
    let class = class_from_winding(&m, &[1, 0]).unwrap();
    let (_, report) = minimize(&m, &g, &class, 2.0f32, &SolverOptions::with_tol(1e-4)).unwrap();
    let closed = 4.0 * std::f32::consts::PI.powi(2);
    assert!((report.energy - closed).abs() < 1e-4 * closed);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_is_convex(seed in 0u64..1000, s in 0.05f64..0.95, p in 2.0f64..5.0, eps in 0.0f64..0.2) {
        let (m, g) = build_flat_torus::<f64>(&[1.0, 0.7], &[4, 5]).unwrap();
        let class = class_from_winding(&m, &[1, 1]).unwrap();
        let a = random_phi(m.num_vertices(), 1.5, seed);
        let b = random_phi(m.num_vertices(), 1.5, seed + 7919);
        let mix = Cochain0(a.0.iter().zip(&b.0).map(|(x, y)| (1.0 - s) * x + s * y).collect());
        let e = |phi: Cochain0<f64>| p_energy(&m, &g, &CircleMap::new(class.clone(), phi), p, eps).unwrap();
        let (ea, eb, em) = (e(a), e(b), e(mix));
        prop_assert!(em <= (1.0 - s) * ea + s * eb + 1e-12 * (ea + eb));
    }

    #[test]
    fn energy_is_gauge_invariant(seed in 0u64..1000, shift in -10.0f64..10.0) {
        let (m, g) = build_flat_torus::<f64>(&[1.0, 1.0, 1.0], &[3, 3, 3]).unwrap();
        let class = class_from_winding(&m, &[1, 0, 2]).unwrap();
        let phi = random_phi(m.num_vertices(), 1.0, seed);
        let moved = Cochain0(phi.0.iter().map(|v| v + shift).collect());
        let e0 = p_energy(&m, &g, &CircleMap::new(class.clone(), phi), 3.0, 0.01).unwrap();
        let e1 = p_energy(&m, &g, &CircleMap::new(class, moved), 3.0, 0.01).unwrap();
        prop_assert!((e0 - e1).abs() <= 1e-12 * e0);
    }
}
