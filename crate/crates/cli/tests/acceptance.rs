//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::f64::consts::PI;
use std::fs;
use std::process::Command;
use std::time::Instant;

use eigenmap_cli::commands::{cmd_bound_study, cmd_perturb_sweep, cmd_pipeline, cmd_uniqueness};
use eigenmap_cli::config::{CaseKind, PerturbationMode};
use eigenmap_cli::{Context, ExperimentConfig};
use eigenmap_core::circle::*;
use eigenmap_core::conformal::*;
use eigenmap_core::mesh::*;
use eigenmap_core::spectrum::*;
use eigenmap_core::sphere::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_phi(n: usize, amp: f64, seed: u64) -> Cochain0<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Cochain0((0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect())
}

fn unit_t3(res: usize) -> (Mesh<f64>, MetricField<f64>) {
    build_flat_torus::<f64>(&[1.0, 1.0, 1.0], &[res; 3]).unwrap()
}

fn context(dir: &TempDir, config: ExperimentConfig) -> Context {
    let mut ctx = Context::new(config);
    ctx.out = dir.path().to_path_buf();
    ctx.quiet = true;
    ctx
}

fn criterion_1() -> Outcome {
    let (m, g) = unit_t3(12);
    let class = class_from_winding(&m, &[1, 0, 0]).map_err(|e| e.to_string())?;
    let init = CircleMap::new(class, random_phi(m.num_vertices(), 0.5, 1));
    let start = Instant::now();
    let (map, r) =
        minimize_from(&m, &g, &init, 3.0, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let exact = (2.0 * PI).powi(3);
    let rel = (r.energy - exact).abs() / exact;
    // sup-norm of dE/dphi_v; the report carries the mass-scaled variant
    let grad = p_energy_gradient(&m, &g, &map, 3.0, 0.0).map_err(|e| e.to_string())?;
    let sup = grad.0.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    check(
        rel < 1e-8 && sup < 1e-8 && secs < 10.0,
        format!(
            "E={:.10} rel_err={rel:.2e} grad={sup:.2e} (mass-scaled {:.2e}) time={secs:.2}s",
            r.energy, r.gradient
        ),
    )
}

fn criterion_2() -> Outcome {
    let (m, g) = unit_t3(5);
    let class = class_from_winding(&m, &[1, 0, 0]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // per-cell factors in [1/e, e]
    let rho: Vec<f64> = (0..m.num_cells())
        .map(|_| rng.gen_range(-1.0f64..1.0).exp())
        .collect();
    let g2 = conformal_scale(&g, &rho).map_err(|e| e.to_string())?;
    let init = CircleMap::new(class, random_phi(m.num_vertices(), 0.3, 4));
    let opts = SolverOptions::with_tol(1e-13);
    let (a, ra) = minimize_from(&m, &g, &init, 3.0, &opts).map_err(|e| e.to_string())?;
    let (b, rb) = minimize_from(&m, &g2, &init, 3.0, &opts).map_err(|e| e.to_string())?;
    let de = (ra.energy - rb.energy).abs() / ra.energy;
    let (ta, tb) = (a.theta(&m), b.theta(&m));
    let diff =
        ta.0.iter()
            .zip(&tb.0)
            .fold(0.0f64, |s, (x, y)| s.max((x - y).abs()));
    let scale = ta.0.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    check(
        de < 1e-10 && diff / scale < 1e-10,
        format!("energy change {de:.2e}, theta change {:.2e}", diff / scale),
    )
}

fn criterion_3() -> Outcome {
    let (m, g) = unit_t3(6);
    let class = class_from_winding(&m, &[1, 1, 0]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rho: Vec<f64> = (0..m.num_cells())
        .map(|_| rng.gen_range(-0.5f64..0.5).exp())
        .collect();
    let g = conformal_scale(&g, &rho).map_err(|e| e.to_string())?;
    let map = CircleMap::new(class, random_phi(m.num_vertices(), 0.2, 5));
    let map = TargetMap::Circle(map);
    let h = rescale_to_unit_density(&m, &g, &map, 1e-8).map_err(|e| e.to_string())?;
    let dens = map.density(&m, &h).map_err(|e| e.to_string())?;
    let ddev = dens.iter().fold(0.0f64, |s, d| s.max((d - 1.0).abs()));
    let (n1, _) = normalize_volume(&m, &h).map_err(|e| e.to_string())?;
    let (n2, _) = normalize_volume(&m, &n1).map_err(|e| e.to_string())?;
    let vdev = (n1.volume() - 1.0).abs();
    let entry = n1
        .cells()
        .iter()
        .flat_map(|c| c.upper())
        .fold(0.0f64, |s, x| s.max(x.abs()));
    let idem = n2.max_abs_diff(&n1) / entry;
    check(
        ddev < 1e-13 && vdev < 1e-12 && idem < 1e-14,
        format!("density dev {ddev:.2e}, volume dev {vdev:.2e}, idempotence {idem:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let flat =
        cmd_pipeline(&context(&tmp, ExperimentConfig::default())).map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::default();
    cfg.case.kind = CaseKind::MappingTorus;
    let twisted = cmd_pipeline(&context(&tmp, cfg)).map_err(|e| e.to_string())?;
    let (a, b) = (flat.candidate.residual, twisted.candidate.residual);
    check(
        a <= 1e-6 && b <= 1e-6,
        format!("flat T^3 residual {a:.2e}, quarter-turn mapping torus residual {b:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.case.kind = CaseKind::ProductSphere;
    cfg.bound_study.levels = vec![1, 2, 3];
    let rows = cmd_bound_study(&context(&tmp, cfg)).map_err(|e| e.to_string())?;
    let target = 16.0 * 2f64.sqrt() * PI * PI;
    let last = rows.last().unwrap();
    let within = (last.energy - target).abs() / target;
    let orders: Vec<f64> = rows.iter().filter_map(|r| r.order).collect();
    let decreasing = rows
        .windows(2)
        .all(|w| w[1].relative_gap.abs() < w[0].relative_gap.abs());

    // 20 random degree-one perturbations of the projection at s = 3
    let (c, gc) = build_flat_torus::<f64>(&[2.0 * PI], &[64]).unwrap();
    let (s, gs) = build_icosphere::<f64>(3).unwrap();
    let (m, g) = build_product((&c, &gc), (&s, &gs)).unwrap();
    let proj = projection_map(&m).map_err(|e| e.to_string())?;
    let base = sphere_energy(&m, &g, &proj, 3.0).map_err(|e| e.to_string())?;
    let mut worst = f64::INFINITY;
    let mut degrees_ok = true;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let vals = proj
            .values()
            .iter()
            .map(|v| v + 0.1 * rng.gen_range(-1.0..1.0))
            .collect();
        let q = SphereMap::normalized(2, vals).map_err(|e| e.to_string())?;
        let report = verify_bound_chain(&m, &g, &q).map_err(|e| e.to_string())?;
        degrees_ok &= report.fiber_degree.iter().all(|&d| d == 1);
        worst = worst.min(report.energy - base);
    }
    check(
        within < 0.02
            && decreasing
            && orders.iter().all(|&o| o >= 1.0)
            && degrees_ok
            && worst >= -1e-9,
        format!(
            "E(s=3)={:.4} vs {target:.4} ({:.3}%), orders {:?}, min perturbed excess {worst:.3e}",
            last.energy,
            100.0 * within,
            orders.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_6() -> Outcome {
    let (m, g) = build_icosphere::<f64>(3).unwrap();
    let id = projection_map(&m).map_err(|e| e.to_string())?;
    let e = sphere_energy(&m, &g, &id, 2.0).map_err(|e| e.to_string())?;
    let rel = (e - 8.0 * PI).abs() / (8.0 * PI);
    // theta -> theta + 0.3 sin(2 theta) along meridians
    let vals: Vec<f64> = id
        .values()
        .chunks(3)
        .flat_map(|p| {
            let th = p[2].clamp(-1.0, 1.0).acos();
            let ph = p[1].atan2(p[0]);
            let t = th + 0.3 * (2.0 * th).sin();
            [t.sin() * ph.cos(), t.sin() * ph.sin(), t.cos()]
        })
        .collect();
    let lat = SphereMap::normalized(2, vals).map_err(|e| e.to_string())?;
    let deg = fiber_degree(&lat, &m, 0).map_err(|e| e.to_string())?;
    let el = sphere_energy(&m, &g, &lat, 2.0).map_err(|e| e.to_string())?;
    check(
        rel < 0.01 && deg == 1 && el > 8.0 * PI,
        format!(
            "identity {e:.5} ({:.3}% from 8pi), latitude map {el:.5} (degree {deg})",
            100.0 * rel
        ),
    )
}

fn first_cluster(spec: &SpectrumResult<f64>, tol: f64) -> (usize, f64, f64) {
    let ids = spec.clusters(tol);
    let members: Vec<f64> = (0..spec.len())
        .filter(|&i| ids[i] == ids[1])
        .map(|i| spec.values[i])
        .collect();
    let lo = members.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = members.iter().copied().fold(0.0, f64::max);
    (members.len(), lo, hi)
}

fn criterion_7() -> Outcome {
    let (t, gt) = unit_t3(12);
    let st = laplace_spectrum(&t, &gt, 10).map_err(|e| e.to_string())?;
    let (s, gs) = build_icosphere::<f64>(3).unwrap();
    let ss = laplace_spectrum(&s, &gs, 8).map_err(|e| e.to_string())?;
    let (mt, lo_t, hi_t) = first_cluster(&st, 0.05);
    let (ms, lo_s, hi_s) = first_cluster(&ss, 0.05);
    let tt = 4.0 * PI * PI;
    let dev_t = ((lo_t - tt).abs().max((hi_t - tt).abs())) / tt;
    let dev_s = ((lo_s - 2.0).abs().max((hi_s - 2.0).abs())) / 2.0;
    check(
        mt == 6 && ms == 3 && dev_t < 0.03 && dev_s < 0.03 && st.values[0].abs() < 1e-8 && ss.values[0].abs() < 1e-8,
        format!(
            "T^3 multiplicity {mt} dev {:.2}%, S^2 multiplicity {ms} dev {:.2}%, lambda0 {:.1e} / {:.1e}",
            100.0 * dev_t,
            100.0 * dev_s,
            st.values[0],
            ss.values[0]
        ),
    )
}

fn criterion_8() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let out =
        cmd_pipeline(&context(&tmp, ExperimentConfig::default())).map_err(|e| e.to_string())?;
    let gap = out.gap.ok_or("gap check disabled")?;
    let below = gap.gap_below.unwrap_or(f64::NAN);
    check(
        gap.match_residual < 1e-3 && below > 0.0,
        format!(
            "cluster k={} multiplicity {}, match residual {:.2e}, gap below {below:.4}",
            gap.k, gap.multiplicity, gap.match_residual
        ),
    )
}

fn criterion_9() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.perturbation.mode = PerturbationMode::General;
    cfg.perturbation.amplitudes = vec![0.01, 0.02, 0.05];
    cfg.perturbation.seeds = 10;
    let start = Instant::now();
    let out = cmd_perturb_sweep(&context(&tmp, cfg)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let base = out.base.min_density_pre;
    let all_ok = out.rows.iter().all(|r| r.status == "ok");
    let min_ratio = out
        .rows
        .iter()
        .map(|r| r.min_density_pre.unwrap_or(0.0) / base)
        .fold(f64::INFINITY, f64::min);
    check(
        out.rows.len() == 30 && all_ok && min_ratio >= 0.5 && secs < 120.0,
        format!(
            "{} rows, all ok: {all_ok}, min density ratio {min_ratio:.4}, time {secs:.1}s",
            out.rows.len()
        ),
    )
}

fn criterion_10() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let flat =
        cmd_uniqueness(&context(&tmp, ExperimentConfig::default())).map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::default();
    cfg.uniqueness.metric_amplitude = 0.05;
    cfg.perturbation.mode = PerturbationMode::General;
    let pert = cmd_uniqueness(&context(&tmp, cfg)).map_err(|e| e.to_string())?;
    check(
        flat.rows.len() == 10 && flat.max_distance <= 1e-6 && pert.max_distance <= 1e-6,
        format!(
            "max aligned distance flat {:.2e}, perturbed {:.2e}",
            flat.max_distance, pert.max_distance
        ),
    )
}

fn criterion_11() -> Outcome {
    let (m, g) = build_flat_torus::<f64>(&[1.0, 1.3, 0.9], &[4, 3, 4]).unwrap();
    let class = class_from_winding(&m, &[1, -1, 2]).map_err(|e| e.to_string())?;
    let h = 1e-6;
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let eps = [1e-3, 1e-2, 1e-1][seed as usize % 3];
        let phi = random_phi(m.num_vertices(), 1.0, 1000 + seed);
        let map = CircleMap::new(class.clone(), phi.clone());
        let grad = p_energy_gradient(&m, &g, &map, 3.0, eps).map_err(|e| e.to_string())?;
        let mut num = 0.0;
        let mut den = 0.0;
        for v in 0..m.num_vertices() {
            let mut plus = phi.clone();
            let mut minus = phi.clone();
            plus.0[v] += h;
            minus.0[v] -= h;
            let ep = p_energy(&m, &g, &CircleMap::new(class.clone(), plus), 3.0, eps).unwrap();
            let em = p_energy(&m, &g, &CircleMap::new(class.clone(), minus), 3.0, eps).unwrap();
            let fd = (ep - em) / (2.0 * h);
            num += (fd - grad.0[v]).powi(2);
            den += fd * fd;
        }
        worst = worst.max((num / den).sqrt());
    }
    check(
        worst < 1e-5,
        format!("worst relative error {worst:.2e} over 20 states"),
    )
}

fn criterion_12() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("config.toml");
    fs::write(
        &cfg,
        "seed = 11\n[case]\nresolution = [6, 6, 6]\n[perturbation]\nmode = \"general\"\nseeds = 3\n[uniqueness]\nstarts = 3\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = tmp.path().join(format!("run{run}"));
        let mut files = Vec::new();
        for cmd in ["pipeline", "perturb-sweep", "uniqueness"] {
            let status = Command::new(env!("CARGO_BIN_EXE_eigenmap"))
                .args([cmd, "--quiet", "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .status()
                .unwrap();
            if !status.success() {
                return Err(format!("{cmd} failed with {status}"));
            }
        }
        for name in ["pipeline.csv", "gap.csv", "sweep.csv", "uniqueness.csv"] {
            files.push(fs::read(out.join(name)).unwrap());
        }
        outputs.push(files);
    }
    check(
        outputs[0] == outputs[1],
        "pipeline, gap, sweep and uniqueness CSVs compared".into(),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 12] = [
        ("closed-form energy", criterion_1),
        ("conformal invariance", criterion_2),
        ("rescale and normalize", criterion_3),
        ("eigenmap residual", criterion_4),
        ("product bound", criterion_5),
        ("degree bound", criterion_6),
        ("spectra", criterion_7),
        ("gap check", criterion_8),
        ("stability sweep", criterion_9),
        ("uniqueness", criterion_10),
        ("gradient oracle", criterion_11),
        ("determinism", criterion_12),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("PASS {:>2} {name}: {d}", i + 1),
            Err(d) => {
                println!("FAIL {:>2} {name}: {d}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
