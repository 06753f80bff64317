//! Conformal rescaling by the density of a map, volume normalization and the
//! eigenmap residual.

use crate::circle::{self, CircleClass, CircleMap, SolveReport, SolverOptions};
use crate::error::{Error, Result};
use crate::mesh::{assemble_operators, conformal_scale, Mesh, MetricField, Operators};
use crate::scalar::Scalar;
use crate::sphere::{self, SphereMap};

/// A map to `S^1` (angle form) or to `S^l` (unit vectors).
#[derive(Clone, Debug, PartialEq)]
pub enum TargetMap<T> {
    Circle(CircleMap<T>),
    Sphere(SphereMap<T>),
}

impl<T: Scalar> TargetMap<T> {
    /// Per-cell density `|du|_g^2`.
    pub fn density(&self, mesh: &Mesh<T>, metric: &MetricField<T>) -> Result<Vec<T>> {
        match self {
            Self::Circle(m) => circle::density(mesh, metric, m),
            Self::Sphere(m) => sphere::sphere_density(mesh, metric, m),
        }
    }

    /// Real coordinate functions of the map into `R^{l+1}`.
    pub fn components(&self, mesh: &Mesh<T>) -> Vec<Vec<T>> {
        match self {
            Self::Circle(m) => m.components(mesh).to_vec(),
            Self::Sphere(m) => m.components(),
        }
    }

    /// Conformally invariant energy `int |du|^n`.
    pub fn energy(&self, mesh: &Mesh<T>, metric: &MetricField<T>) -> Result<T> {
        let n = T::of_usize(mesh.dim());
        match self {
            Self::Circle(m) => circle::p_energy(mesh, metric, m, n, T::zero()),
            Self::Sphere(m) => sphere::sphere_energy(mesh, metric, m, n),
        }
    }
}

pub const DEFAULT_DENSITY_THRESHOLD: f64 = 1e-8;

/// `g' = |du|_g^2 g` cell by cell; fails where `|du| < threshold`.
pub fn rescale_to_unit_density<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    map: &TargetMap<T>,
    threshold: T,
) -> Result<MetricField<T>> {
    let rho = map.density(mesh, metric)?;
    if let Some((cell, d)) = rho
        .iter()
        .enumerate()
        .find(|(_, d)| !(**d >= threshold * threshold))
    {
        return Err(Error::DegenerateDensity {
            cell,
            value: d.to_f64_lossy(),
        });
    }
    conformal_scale(metric, &rho)
}

/// Returns `vol^{-2/n} g` and the factor `vol^{-2/n}`.
pub fn normalize_volume<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
) -> Result<(MetricField<T>, T)> {
    let vol = metric.volume();
    if !(vol > T::zero()) || !vol.is_finite() {
        return Err(Error::InvalidGeometry(format!(
            "volume {} cannot be normalized",
            vol.to_f64_lossy()
        )));
    }
    let scale = vol.powf(-T::lit(2.0) / T::of_usize(mesh.dim()));
    Ok((metric.scaled(scale), scale))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenmapResidual<T> {
    /// Mass-normalized `|Delta u - |du|^2 u| / (mean density |u|)`.
    pub residual: T,
    /// `max density / min density - 1`.
    pub density_variation: T,
    /// Volume-weighted mean density.
    pub mean_density: T,
}

/// Weak-form eigenmap defect.
///
/// For a circle map `u = exp(i alpha)` one has
/// `|Delta u - |du|^2 u| = |Delta alpha|`, so the defect is the divergence of
/// `theta`. For sphere maps every coordinate is tested against
/// `Delta u_j = |du|^2 u_j` with the density lumped to the vertices.
pub fn eigenmap_residual<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    map: &TargetMap<T>,
) -> Result<EigenmapResidual<T>> {
    let ops = assemble_operators(mesh, metric)?;
    let rho = map.density(mesh, metric)?;
    let vol = ops.total_mass();
    let mean = ops
        .cells
        .iter()
        .zip(&rho)
        .map(|(c, r)| c.volume * *r)
        .sum::<T>()
        / vol;
    let (lo, hi) = rho.iter().fold((T::infinity(), T::zero()), |(lo, hi), r| {
        (lo.min(*r), hi.max(*r))
    });
    let density_variation = if lo > T::zero() {
        hi / lo - T::one()
    } else {
        T::infinity()
    };
    let (num, den) = match map {
        TargetMap::Circle(m) => circle_defect(mesh, &ops, m),
        TargetMap::Sphere(m) => sphere_defect(mesh, &ops, &rho, m),
    };
    let residual = if mean > T::zero() && den > T::zero() {
        num.sqrt() / (mean * den.sqrt())
    } else {
        T::infinity()
    };
    Ok(EigenmapResidual {
        residual,
        density_variation,
        mean_density: mean,
    })
}

/// Squared mass norms of `M^{-1} r` and of `u` for the angle form.
fn circle_defect<T: Scalar>(mesh: &Mesh<T>, ops: &Operators<T>, map: &CircleMap<T>) -> (T, T) {
    let theta = map.theta(mesh);
    let n = mesh.dim();
    let mut r = vec![T::zero(); mesh.num_vertices()];
    let mut a = [T::zero(); 3];
    let mut ga = [T::zero(); 3];
    for (c, geo) in ops.cells.iter().enumerate() {
        for i in 0..n {
            a[i] = theta.on_cell_edge(mesh, c, i + 1);
        }
        geo.inv_metric.apply(&a[..n], &mut ga[..n]);
        let cell = mesh.cell(c);
        for i in 0..n {
            let w = geo.volume * ga[i];
            r[cell[i + 1]] += w;
            r[cell[0]] -= w;
        }
    }
    let num = r.iter().zip(&ops.mass).map(|(ri, m)| *ri * *ri / *m).sum();
    (num, ops.total_mass())
}

fn sphere_defect<T: Scalar>(
    mesh: &Mesh<T>,
    ops: &Operators<T>,
    rho: &[T],
    map: &SphereMap<T>,
) -> (T, T) {
    let share = T::one() / T::of_usize(mesh.dim() + 1);
    let mut weighted = vec![T::zero(); mesh.num_vertices()];
    for (c, geo) in ops.cells.iter().enumerate() {
        for &v in mesh.cell(c) {
            weighted[v] += rho[c] * geo.volume * share;
        }
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for u in map.components() {
        let ku = ops.stiffness.apply(&u);
        for v in 0..u.len() {
            let r = ku[v] - weighted[v] * u[v];
            num += r * r / ops.mass[v];
            den += ops.mass[v] * u[v] * u[v];
        }
    }
    (num, den)
}

/// Candidate extremal metric produced from a nowhere-degenerate map.
#[derive(Clone, Debug)]
pub struct ExtremalCandidate<T> {
    /// `g' = |du|^2 g`.
    pub rescaled: MetricField<T>,
    /// Unit-volume representative of `g'`.
    pub normalized: MetricField<T>,
    pub map: TargetMap<T>,
    /// Factor `vol(g')^{-2/n}` taking `g'` to the normalized metric.
    pub scale: T,
    /// Conformally invariant energy of the map.
    pub energy: T,
    /// `min |du|_g` before rescaling.
    pub min_density_pre: T,
    /// Density under the normalized metric, i.e. the candidate eigenvalue.
    pub eigenvalue_estimate: T,
    pub residual: T,
    pub density_variation: T,
    /// `|vol(normalized) - 1|`.
    pub volume_check: T,
    pub solve: Option<SolveReport<T>>,
}

impl<T: Scalar> ExtremalCandidate<T> {
    pub const CSV_HEADER: &'static str =
        "case,min_density_pre,eigenvalue_estimate,residual,density_variation,volume_check";

    pub fn csv_row(&self, case_id: &str) -> String {
        format!(
            "{},{:.12e},{:.12e},{:.6e},{:.6e},{:.3e}",
            case_id,
            self.min_density_pre.to_f64_lossy(),
            self.eigenvalue_estimate.to_f64_lossy(),
            self.residual.to_f64_lossy(),
            self.density_variation.to_f64_lossy(),
            self.volume_check.to_f64_lossy()
        )
    }
}

/// What the pipeline starts from.
#[derive(Clone, Debug)]
pub enum PipelineInput<T> {
    /// Minimize the `n`-energy in this class from the linear representative.
    Circle(CircleClass<T>),
    /// Minimize from a given circle map.
    CircleFrom(CircleMap<T>),
    /// Use a sphere map, optionally after projected descent steps.
    Sphere {
        map: SphereMap<T>,
        steps: usize,
        step_size: T,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions<T> {
    pub solver: SolverOptions<T>,
    pub density_threshold: T,
}

impl<T: Scalar> Default for PipelineOptions<T> {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            density_threshold: T::lit(DEFAULT_DENSITY_THRESHOLD),
        }
    }
}

/// Minimize, check the density floor, rescale by the density, normalize the
/// volume and measure the eigenmap residual under the normalized metric.
pub fn run_extremal_pipeline<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    input: &PipelineInput<T>,
    opts: &PipelineOptions<T>,
) -> Result<ExtremalCandidate<T>> {
    let n = T::of_usize(mesh.dim());
    let (map, solve) = match input {
        PipelineInput::Circle(class) => {
            let (m, r) = circle::minimize(mesh, metric, class, n, &opts.solver)?;
            (TargetMap::Circle(m), Some(r))
        }
        PipelineInput::CircleFrom(init) => {
            let (m, r) = circle::minimize_from(mesh, metric, init, n, &opts.solver)?;
            (TargetMap::Circle(m), Some(r))
        }
        PipelineInput::Sphere {
            map,
            steps,
            step_size,
        } => {
            let run = sphere::minimize_sphere(mesh, metric, map, n, *steps, *step_size)?;
            if let Some(err) = run.drift {
                return Err(err);
            }
            (TargetMap::Sphere(run.map), None)
        }
    };
    let rho = map.density(mesh, metric)?;
    let min_density_pre = rho
        .iter()
        .copied()
        .fold(T::infinity(), T::min)
        .max(T::zero())
        .sqrt();
    let rescaled = rescale_to_unit_density(mesh, metric, &map, opts.density_threshold)?;
    let (normalized, scale) = normalize_volume(mesh, &rescaled)?;
    let res = eigenmap_residual(mesh, &normalized, &map)?;
    Ok(ExtremalCandidate {
        energy: map.energy(mesh, metric)?,
        volume_check: (normalized.volume() - T::one()).abs(),
        eigenvalue_estimate: T::one() / scale,
        residual: res.residual,
        density_variation: res.density_variation,
        rescaled,
        normalized,
        map,
        scale,
        min_density_pre,
        solve,
    })
}
