use std::fs;
use std::path::PathBuf;

use eigenmap_core::circle::{
    align_rotation, class_from_winding, minimize_from, CircleMap, SolverOptions,
};
use eigenmap_core::conformal::{
    run_extremal_pipeline, ExtremalCandidate, PipelineInput, PipelineOptions, TargetMap,
};
use eigenmap_core::mesh::{dump_mesh, lumped_mass, Cochain0};
use eigenmap_core::spectrum::{
    extremality_gap_check, laplace_spectrum_with, EigenOptions, GapReport, SpectrumResult,
};
use eigenmap_core::sphere::{
    lower_bound, projection_map, sphere_energy, verify_bound_chain, SphereMap,
};
use eigenmap_core::{Error, Mesh64, MetricField64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cases::{build_case, build_case_at, winding_for, Case};
use crate::config::{CaseKind, ExperimentConfig, InitKind};
use crate::perturb::perturb;
use crate::plot::loglog_svg;
use crate::CliError;

pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub quiet: bool,
}

impl Context {
    pub fn new(config: ExperimentConfig) -> Self {
        let out = config.output.dir.clone();
        Self {
            config,
            out,
            quiet: false,
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), num)
}

/// Row status for a failed pipeline step.
pub fn status_of(err: &Error) -> &'static str {
    match err {
        Error::NoConvergence { .. } => "no_convergence",
        _ => "degenerate",
    }
}

pub fn solver_options(cfg: &ExperimentConfig) -> SolverOptions<f64> {
    let s = &cfg.solver;
    SolverOptions {
        tol: s.tol,
        eps_start: s.eps_start,
        eps_end: s.eps_end,
        eps_factor: s.eps_factor,
        max_iter: s.max_iter,
        memory: s.memory,
    }
}

pub fn pipeline_options(cfg: &ExperimentConfig) -> PipelineOptions<f64> {
    PipelineOptions {
        solver: solver_options(cfg),
        density_threshold: cfg.solver.density_threshold,
    }
}

fn eigen_options(cfg: &ExperimentConfig) -> EigenOptions<f64> {
    EigenOptions {
        tol: cfg.spectrum.tol,
        max_iter: cfg.spectrum.max_iter,
        ..EigenOptions::default()
    }
}

fn random_phi(n: usize, amplitude: f64, seed: u64) -> Cochain0<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Cochain0(
        (0..n)
            .map(|_| amplitude * rng.gen_range(-1.0..1.0))
            .collect(),
    )
}

fn circle_start(
    mesh: &Mesh64,
    winding: &[i64],
    init: InitKind,
    amplitude: f64,
    seed: u64,
) -> Result<CircleMap<f64>, Error> {
    let class = class_from_winding(mesh, winding)?;
    Ok(match init {
        InitKind::Linear => CircleMap::linear(class, mesh.num_vertices()),
        InitKind::Random => CircleMap::new(class, random_phi(mesh.num_vertices(), amplitude, seed)),
    })
}

pub fn pipeline_input(
    cfg: &ExperimentConfig,
    mesh: &Mesh64,
    seed: u64,
) -> Result<PipelineInput<f64>, Error> {
    if cfg.case.kind.sphere_target() {
        return Ok(PipelineInput::Sphere {
            map: projection_map(mesh)?,
            steps: cfg.map.descent_steps,
            step_size: cfg.map.step_size,
        });
    }
    let winding = winding_for(mesh, cfg.map.winding.as_deref())?;
    let start = circle_start(mesh, &winding, cfg.map.init, cfg.map.init_amplitude, seed)?;
    Ok(match cfg.map.init {
        InitKind::Linear => PipelineInput::Circle(start.class().clone()),
        InitKind::Random => PipelineInput::CircleFrom(start),
    })
}

/// Spectrum of the normalized candidate metric and the gap report for the
/// map components; `None` when the spectrum is disabled.
pub fn gap_report(
    cfg: &ExperimentConfig,
    mesh: &Mesh64,
    cand: &ExtremalCandidate<f64>,
) -> Option<Result<GapReport<f64>, Error>> {
    let count = cfg
        .spectrum
        .count
        .min(mesh.num_vertices().saturating_sub(1));
    if count == 0 {
        return None;
    }
    Some(
        laplace_spectrum_with(mesh, &cand.normalized, count, &eigen_options(cfg)).and_then(
            |spec| {
                extremality_gap_check(
                    &spec,
                    &cand.map.components(mesh),
                    cand.eigenvalue_estimate,
                    cfg.spectrum.cluster_tol,
                )
            },
        ),
    )
}

fn map_dump(map: &TargetMap<f64>) -> String {
    match map {
        TargetMap::Circle(m) => m.dump(),
        TargetMap::Sphere(m) => m.dump(),
    }
}

pub struct PipelineOutcome {
    pub candidate: ExtremalCandidate<f64>,
    pub gap: Option<GapReport<f64>>,
}

pub const PIPELINE_HEADER: &str =
    "case,min_density_pre,eigenvalue_estimate,residual,density_variation,volume_check,energy,status";

pub fn cmd_pipeline(ctx: &Context) -> Result<PipelineOutcome, CliError> {
    let cfg = &ctx.config;
    let Case { mesh, metric } = build_case(&cfg.case)?;
    let id = cfg.case.kind.name();
    let input = pipeline_input(cfg, &mesh, cfg.seed)?;
    let cand = match run_extremal_pipeline(&mesh, &metric, &input, &pipeline_options(cfg)) {
        Ok(c) => c,
        Err(e) => {
            ctx.write(
                "pipeline.csv",
                &format!(
                    "{PIPELINE_HEADER}\n{id},nan,nan,nan,nan,nan,nan,{}\n",
                    status_of(&e)
                ),
            )?;
            return Err(e.into());
        }
    };
    ctx.write(
        "pipeline.csv",
        &format!(
            "{PIPELINE_HEADER}\n{},{},ok\n",
            cand.csv_row(id),
            num(cand.energy)
        ),
    )?;
    ctx.write("map.txt", &map_dump(&cand.map))?;
    ctx.write("metric.txt", &dump_mesh(&mesh, &cand.normalized))?;
    let gap = gap_report(cfg, &mesh, &cand).transpose()?;
    if let Some(g) = &gap {
        ctx.write(
            "gap.csv",
            &format!("{}\n{}\n", GapReport::<f64>::CSV_HEADER, g.csv_row()),
        )?;
    }
    ctx.say(format!(
        "{id}: energy {:.10e}, eigenvalue estimate {:.10e}, residual {:.3e}, min density {:.4e}",
        cand.energy, cand.eigenvalue_estimate, cand.residual, cand.min_density_pre
    ));
    if let Some(g) = &gap {
        ctx.say(format!(
            "cluster k={} multiplicity {}, gap below {}, gap above {}, match residual {:.3e}",
            g.k,
            g.multiplicity,
            opt(g.gap_below),
            opt(g.gap_above),
            g.match_residual
        ));
    }
    Ok(PipelineOutcome {
        candidate: cand,
        gap,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub amplitude: f64,
    pub seed: u64,
    pub min_density_pre: Option<f64>,
    pub energy: Option<f64>,
    pub eigenvalue_estimate: Option<f64>,
    pub eigenmap_residual: Option<f64>,
    pub gap_below: Option<f64>,
    pub gap_above: Option<f64>,
    pub status: &'static str,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "amplitude,seed,min_density_pre,energy,eigenvalue_estimate,eigenmap_residual,gap_below,gap_above,status";

    fn failed(amplitude: f64, seed: u64, err: &Error) -> Self {
        Self {
            amplitude,
            seed,
            min_density_pre: None,
            energy: None,
            eigenvalue_estimate: None,
            eigenmap_residual: None,
            gap_below: None,
            gap_above: None,
            status: status_of(err),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.amplitude,
            self.seed,
            opt(self.min_density_pre),
            opt(self.energy),
            opt(self.eigenvalue_estimate),
            opt(self.eigenmap_residual),
            opt(self.gap_below),
            opt(self.gap_above),
            self.status
        )
    }
}

fn sweep_row(cfg: &ExperimentConfig, case: &Case, amplitude: f64, seed: u64) -> SweepRow {
    let p = &cfg.perturbation;
    let run = perturb(
        &case.mesh,
        &case.metric,
        p.mode,
        amplitude,
        p.frequency,
        seed,
    )
    .and_then(|metric| {
        let input = pipeline_input(cfg, &case.mesh, seed)?;
        run_extremal_pipeline(&case.mesh, &metric, &input, &pipeline_options(cfg))
    });
    let cand = match run {
        Ok(c) => c,
        Err(e) => return SweepRow::failed(amplitude, seed, &e),
    };
    let gap = gap_report(cfg, &case.mesh, &cand).and_then(|r| r.ok());
    SweepRow {
        amplitude,
        seed,
        min_density_pre: Some(cand.min_density_pre),
        energy: Some(cand.energy),
        eigenvalue_estimate: Some(cand.eigenvalue_estimate),
        eigenmap_residual: Some(cand.residual),
        gap_below: gap.as_ref().and_then(|g| g.gap_below),
        gap_above: gap.as_ref().and_then(|g| g.gap_above),
        status: "ok",
    }
}

pub struct SweepOutcome {
    pub base: ExtremalCandidate<f64>,
    pub rows: Vec<SweepRow>,
    /// Largest amplitude whose rows are all ok.
    pub largest_ok: Option<f64>,
}

pub fn cmd_perturb_sweep(ctx: &Context) -> Result<SweepOutcome, CliError> {
    let cfg = &ctx.config;
    let case = build_case(&cfg.case)?;
    let input = pipeline_input(cfg, &case.mesh, cfg.seed)?;
    let base = run_extremal_pipeline(&case.mesh, &case.metric, &input, &pipeline_options(cfg))?;
    let p = &cfg.perturbation;
    let mut rows = Vec::with_capacity(p.amplitudes.len() * p.seeds);
    for &amplitude in &p.amplitudes {
        for i in 0..p.seeds {
            rows.push(sweep_row(cfg, &case, amplitude, cfg.seed + i as u64));
        }
    }
    let mut csv = format!("{}\n", SweepRow::CSV_HEADER);
    for r in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    ctx.write("sweep.csv", &csv)?;
    let largest_ok = p
        .amplitudes
        .iter()
        .copied()
        .take_while(|&a| {
            rows.iter()
                .filter(|r| r.amplitude == a)
                .all(|r| r.status == "ok")
        })
        .last();
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    ctx.say(format!(
        "{} sweep: {} rows, {} failed; base min density {:.6e}, base energy {:.10e}",
        p.mode.name(),
        rows.len(),
        failed,
        base.min_density_pre,
        base.energy
    ));
    ctx.say(match largest_ok {
        Some(a) => format!("largest amplitude with all rows ok: {a}"),
        None => "no amplitude had all rows ok".to_string(),
    });
    Ok(SweepOutcome {
        base,
        rows,
        largest_ok,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub level: usize,
    /// Longest chord of the sphere fiber.
    pub h: f64,
    pub energy: f64,
    pub bound: f64,
    pub target: f64,
    pub relative_gap: f64,
    /// `log(gap_prev / gap) / log(h_prev / h)`.
    pub order: Option<f64>,
    pub holder_slack: f64,
    pub degree_slack: f64,
    pub min_perturbed_energy: Option<f64>,
}

impl BoundRow {
    pub const CSV_HEADER: &'static str =
        "s,h,energy,bound,target,relative_gap,order,holder_slack,degree_slack,min_perturbed_energy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.level,
            num(self.h),
            num(self.energy),
            num(self.bound),
            num(self.target),
            num(self.relative_gap),
            opt(self.order),
            num(self.holder_slack),
            num(self.degree_slack),
            opt(self.min_perturbed_energy)
        )
    }
}

fn max_fiber_chord(mesh: &Mesh64) -> f64 {
    let Some(fib) = mesh.fibration() else {
        return f64::NAN;
    };
    let mut h = 0.0f64;
    for cell in fib.fiber_cells() {
        for (i, &a) in cell.iter().enumerate() {
            for &b in &cell[i + 1..] {
                let d: f64 = fib
                    .position(a)
                    .iter()
                    .zip(fib.position(b))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                h = h.max(d.sqrt());
            }
        }
    }
    h
}

fn perturbed_sphere_energy(
    mesh: &Mesh64,
    metric: &MetricField64,
    base: &SphereMap<f64>,
    amplitude: f64,
    seed: u64,
) -> Result<f64, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = base
        .values()
        .iter()
        .map(|v| v + amplitude * rng.gen_range(-1.0..1.0))
        .collect();
    let map = SphereMap::normalized(base.l(), values)?;
    sphere_energy(mesh, metric, &map, mesh.dim() as f64)
}

pub fn cmd_bound_study(ctx: &Context) -> Result<Vec<BoundRow>, CliError> {
    let cfg = &ctx.config;
    if cfg.case.kind != CaseKind::ProductSphere {
        return Err(CliError::Usage(
            "bound-study needs case.kind = \"product_sphere\"".into(),
        ));
    }
    let bs = &cfg.bound_study;
    let target = lower_bound(cfg.case.circle_length, 2, 1)?;
    let mut rows: Vec<BoundRow> = Vec::new();
    for &level in &bs.levels {
        let Case { mesh, metric } = build_case_at(&cfg.case, level)?;
        let proj = projection_map(&mesh)?;
        let report = verify_bound_chain(&mesh, &metric, &proj)?;
        let mut min_perturbed: Option<f64> = None;
        for k in 0..bs.perturbations {
            let e =
                perturbed_sphere_energy(&mesh, &metric, &proj, bs.amplitude, cfg.seed + k as u64)?;
            min_perturbed = Some(min_perturbed.map_or(e, |m| m.min(e)));
        }
        let h = max_fiber_chord(&mesh);
        let relative_gap = (target - report.energy) / target;
        let order = rows
            .last()
            .map(|prev| (prev.relative_gap.abs() / relative_gap.abs()).ln() / (prev.h / h).ln());
        rows.push(BoundRow {
            level,
            h,
            energy: report.energy,
            bound: report.bound,
            target,
            relative_gap,
            order,
            holder_slack: report.holder_slack,
            degree_slack: report.degree_slack,
            min_perturbed_energy: min_perturbed,
        });
        ctx.say(format!(
            "s={level}: energy {:.8e}, relative gap {:.4e}, order {}",
            report.energy,
            relative_gap,
            opt(order)
        ));
    }
    let mut csv = format!("{}\n", BoundRow::CSV_HEADER);
    for r in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    ctx.write("bound_study.csv", &csv)?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.relative_gap.abs())).collect();
    ctx.write(
        "bound_study.svg",
        &loglog_svg(
            "projection energy gap",
            "fiber mesh size h",
            "relative gap",
            &points,
        ),
    )?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniquenessRow {
    pub a: usize,
    pub b: usize,
    pub phase: f64,
    pub distance: f64,
}

pub struct UniquenessOutcome {
    pub rows: Vec<UniquenessRow>,
    pub max_distance: f64,
}

pub fn cmd_uniqueness(ctx: &Context) -> Result<UniquenessOutcome, CliError> {
    let cfg = &ctx.config;
    if cfg.case.kind.sphere_target() {
        return Err(CliError::Usage(
            "uniqueness needs a circle-target case".into(),
        ));
    }
    let u = &cfg.uniqueness;
    let Case { mesh, metric } = build_case(&cfg.case)?;
    let metric = if u.metric_amplitude > 0.0 {
        let p = &cfg.perturbation;
        perturb(
            &mesh,
            &metric,
            p.mode,
            u.metric_amplitude,
            p.frequency,
            cfg.seed,
        )?
    } else {
        metric
    };
    let mut opts = solver_options(cfg);
    opts.tol = u.tol;
    let n = mesh.dim() as f64;
    let mut maps = Vec::with_capacity(u.starts);
    for i in 0..u.starts {
        let winding = match &u.windings {
            Some(w) => w[i % w.len()].clone(),
            None => winding_for(&mesh, cfg.map.winding.as_deref())?,
        };
        let start = circle_start(
            &mesh,
            &winding,
            InitKind::Random,
            u.amplitude,
            cfg.seed + i as u64,
        )?;
        let (map, _) = minimize_from(&mesh, &metric, &start, n, &opts)?;
        maps.push(map);
    }
    let mass = lumped_mass(&mesh, &metric);
    let mut rows = Vec::new();
    for a in 0..maps.len() {
        for b in a + 1..maps.len() {
            let (phase, distance) = align_rotation(&maps[a], &maps[b], &mass)?;
            rows.push(UniquenessRow {
                a,
                b,
                phase,
                distance,
            });
        }
    }
    let max_distance = rows.iter().fold(0.0f64, |m, r| m.max(r.distance));
    let mut csv = String::from("start_a,start_b,phase,sup_distance\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.a,
            r.b,
            num(r.phase),
            num(r.distance)
        ));
    }
    ctx.write("uniqueness.csv", &csv)?;
    ctx.say(format!(
        "{} starts, max aligned sup-distance {max_distance:.3e}",
        u.starts
    ));
    Ok(UniquenessOutcome { rows, max_distance })
}

pub fn cmd_spectrum(ctx: &Context) -> Result<SpectrumResult<f64>, CliError> {
    let cfg = &ctx.config;
    if cfg.spectrum.count == 0 {
        return Err(CliError::Usage("spectrum.count must be positive".into()));
    }
    let Case { mesh, metric } = build_case(&cfg.case)?;
    let spec = laplace_spectrum_with(&mesh, &metric, cfg.spectrum.count, &eigen_options(cfg))?;
    ctx.write("spectrum.csv", &spec.to_csv(cfg.spectrum.cluster_tol))?;
    let shown: Vec<String> = spec
        .values
        .iter()
        .take(8)
        .map(|v| format!("{v:.6e}"))
        .collect();
    ctx.say(format!(
        "{} eigenvalues: {} ...",
        spec.len(),
        shown.join(" ")
    ));
    Ok(spec)
}

pub fn mesh_info(mesh: &Mesh64, metric: &MetricField64) -> String {
    let v = mesh.num_vertices() as i64;
    let e = mesh.num_edges() as i64;
    let c = mesh.num_cells() as i64;
    let euler = match mesh.dim() {
        1 => v - c,
        2 => v - e + c,
        _ => v - e + mesh.triangles().len() as i64 - c,
    };
    let mut out = format!(
        "dim {}\nvertices {v}\nedges {e}\ncells {c}\neuler_characteristic {euler}\nvolume {:.12e}\n",
        mesh.dim(),
        metric.volume()
    );
    if let Some(chart) = mesh.chart() {
        let periodic = chart.periods().iter().filter(|p| p.is_some()).count();
        out.push_str(&format!(
            "chart_axes {}\nperiodic_generators {periodic}\n",
            chart.axes()
        ));
    }
    if let Some(fib) = mesh.fibration() {
        out.push_str(&format!(
            "sphere_fiber_dim {}\nfibers {}\nfiber_vertices {}\n",
            fib.l(),
            fib.base_count(),
            fib.fiber_vertex_count()
        ));
    }
    out
}

pub fn cmd_mesh_info(ctx: &Context) -> Result<String, CliError> {
    let Case { mesh, metric } = build_case(&ctx.config.case)?;
    let info = format!(
        "case {}\n{}",
        ctx.config.case.kind.name(),
        mesh_info(&mesh, &metric)
    );
    ctx.say(info.trim_end());
    Ok(info)
}
