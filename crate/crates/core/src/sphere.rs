//! Maps into the round sphere `S^l`, `l in {1, 2}`: energies, fiber degrees,
//! projected descent, and the product energy bound.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::{cell_geometry, lumped_mass, CellGeometry, Mesh, MetricField, SphereFibration};
use crate::scalar::Scalar;

/// Constants of the unit sphere `S^l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereConstants<T> {
    pub l: usize,
    /// Total volume of `S^l`.
    pub vol: T,
    /// First nonzero Laplace eigenvalue, `l`.
    pub lambda1: T,
}

impl<T: Scalar> SphereConstants<T> {
    pub fn new(l: usize) -> Result<Self> {
        let vol = match l {
            1 => T::TAU(),
            2 => T::lit(4.0) * T::PI(),
            _ => return Err(Error::UnsupportedDimension(l)),
        };
        Ok(Self {
            l,
            vol,
            lambda1: T::of_usize(l),
        })
    }
}

/// Unit vector in `R^{l+1}` per vertex, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereMap<T> {
    l: usize,
    values: Vec<T>,
}

impl<T: Scalar> SphereMap<T> {
    /// Checks that every vector has unit length to `1e-12` (relative to
    /// the scalar precision for `f32`).
    pub fn new(l: usize, values: Vec<T>) -> Result<Self> {
        if !(1..=2).contains(&l) {
            return Err(Error::UnsupportedDimension(l));
        }
        if !values.len().is_multiple_of(l + 1) {
            return Err(Error::InvalidGeometry(format!(
                "{} values is not a multiple of {}",
                values.len(),
                l + 1
            )));
        }
        let tol = T::lit(1e-12).max(T::lit(64.0) * T::eps());
        for (v, x) in values.chunks(l + 1).enumerate() {
            let r = x.iter().map(|c| *c * *c).sum::<T>().sqrt();
            if !((r - T::one()).abs() <= tol) {
                return Err(Error::InvalidGeometry(format!(
                    "vertex {v} has norm {}",
                    r.to_f64_lossy()
                )));
            }
        }
        Ok(Self { l, values })
    }

    /// Normalizes every nonzero vector; zero vectors are rejected.
    pub fn normalized(l: usize, mut values: Vec<T>) -> Result<Self> {
        for x in values.chunks_mut(l + 1) {
            let r = x.iter().map(|c| *c * *c).sum::<T>().sqrt();
            if !(r > T::zero()) {
                return Err(Error::InvalidGeometry(
                    "zero vector cannot be normalized".into(),
                ));
            }
            x.iter_mut().for_each(|c| *c /= r);
        }
        Self::new(l, values)
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.values.len() / (self.l + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vertex(&self, v: usize) -> &[T] {
        &self.values[v * (self.l + 1)..(v + 1) * (self.l + 1)]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Coordinate functions, one vertex vector per ambient axis.
    pub fn components(&self) -> Vec<Vec<T>> {
        (0..=self.l)
            .map(|a| {
                self.values
                    .iter()
                    .skip(a)
                    .step_by(self.l + 1)
                    .copied()
                    .collect()
            })
            .collect()
    }

    /// `R v` at every vertex for a row-major `(l+1) x (l+1)` matrix `R`.
    pub fn transformed(&self, r: &[T]) -> Result<Self> {
        let k = self.l + 1;
        let mut out = vec![T::zero(); self.values.len()];
        for (x, y) in self.values.chunks(k).zip(out.chunks_mut(k)) {
            for i in 0..k {
                y[i] = (0..k).map(|j| r[i * k + j] * x[j]).sum();
            }
        }
        Self::new(self.l, out)
    }

    /// Text dump: `vertex_id c_0 ... c_l` per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for v in 0..self.len() {
            write!(out, "{v}").unwrap();
            for c in self.vertex(v) {
                write!(out, " {c}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn load(text: &str) -> Result<Self> {
        let mut rows: Vec<(usize, Vec<T>)> = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut parts = line.split_whitespace();
            let v: usize = parts
                .next()
                .unwrap()
                .parse()
                .map_err(|_| Error::Parse(format!("bad vertex id in `{line}`")))?;
            let c = parts
                .map(|p| {
                    p.parse::<T>()
                        .map_err(|_| Error::Parse(format!("bad value `{p}`")))
                })
                .collect::<Result<Vec<T>>>()?;
            rows.push((v, c));
        }
        let width = rows
            .first()
            .map(|r| r.1.len())
            .ok_or_else(|| Error::Parse("empty sphere map".into()))?;
        if width < 2 || rows.iter().any(|r| r.1.len() != width) {
            return Err(Error::Parse("inconsistent sphere map width".into()));
        }
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
            return Err(Error::Parse("vertex ids must be 0..V without gaps".into()));
        }
        Self::new(width - 1, rows.into_iter().flat_map(|r| r.1).collect())
    }
}

fn fibration<T: Scalar>(mesh: &Mesh<T>) -> Result<&SphereFibration<T>> {
    mesh.fibration().ok_or(Error::NotAProduct)
}

/// Projection onto the sphere factor: vertex `(x, p)` maps to `p`.
pub fn projection_map<T: Scalar>(mesh: &Mesh<T>) -> Result<SphereMap<T>> {
    let fib = fibration(mesh)?;
    let k = fib.l() + 1;
    let mut values = vec![T::nan(); mesh.num_vertices() * k];
    for x in 0..fib.base_count() {
        for f in 0..fib.fiber_vertex_count() {
            let v = fib.vertex(x, f);
            values[v * k..(v + 1) * k].copy_from_slice(fib.position(f));
        }
    }
    SphereMap::new(fib.l(), values)
}

/// Per-cell edge differences `a_i = v(v_i) - v(v_0)`, row-major `n x (l+1)`.
fn cell_diffs<T: Scalar>(mesh: &Mesh<T>, map: &SphereMap<T>, c: usize, out: &mut [T]) {
    let k = map.l + 1;
    let cell = mesh.cell(c);
    let v0 = map.vertex(cell[0]);
    for i in 0..mesh.dim() {
        let vi = map.vertex(cell[i + 1]);
        for a in 0..k {
            out[i * k + a] = vi[a] - v0[a];
        }
    }
}

/// `|dv|^2 = sum_ij G^{-1}_ij <a_i, a_j>`.
fn trace_density<T: Scalar>(geo: &CellGeometry<T>, diffs: &[T], k: usize) -> T {
    let n = geo.inv_metric.dim();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            let ip: T = (0..k).map(|a| diffs[i * k + a] * diffs[j * k + a]).sum();
            s += geo.inv_metric.get(i, j) * ip;
        }
    }
    s
}

fn check_sizes<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    map: &SphereMap<T>,
) -> Result<()> {
    if metric.len() != mesh.num_cells() {
        return Err(Error::InvalidGeometry(
            "metric does not match the mesh".into(),
        ));
    }
    if map.len() != mesh.num_vertices() {
        return Err(Error::InvalidGeometry(format!(
            "map has {} vertices, mesh has {}",
            map.len(),
            mesh.num_vertices()
        )));
    }
    Ok(())
}

/// Per-cell density `|dv|_g^2` of the piecewise-linear interpolant.
pub fn sphere_density<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    map: &SphereMap<T>,
) -> Result<Vec<T>> {
    check_sizes(mesh, metric, map)?;
    let geo = cell_geometry(metric)?;
    let k = map.l + 1;
    let mut diffs = [T::zero(); 9];
    Ok((0..mesh.num_cells())
        .map(|c| {
            cell_diffs(mesh, map, c, &mut diffs);
            trace_density(&geo[c], &diffs, k)
        })
        .collect())
}

/// `sum_c |dv|^p vol_c`.
pub fn sphere_energy<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    map: &SphereMap<T>,
    p: T,
) -> Result<T> {
    Ok(energy_and_gradient(mesh, &cell_geometry(metric)?, map, p, false)?.0)
}

/// Gradient of [`sphere_energy`] with respect to the ambient vertex vectors
/// (not projected to the tangent spaces), row-major like the map.
pub fn sphere_energy_gradient<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    map: &SphereMap<T>,
    p: T,
) -> Result<Vec<T>> {
    check_sizes(mesh, metric, map)?;
    Ok(energy_and_gradient(mesh, &cell_geometry(metric)?, map, p, true)?.1)
}

fn energy_and_gradient<T: Scalar>(
    mesh: &Mesh<T>,
    geo: &[CellGeometry<T>],
    map: &SphereMap<T>,
    p: T,
    with_grad: bool,
) -> Result<(T, Vec<T>)> {
    if geo.len() != mesh.num_cells() || map.len() != mesh.num_vertices() {
        return Err(Error::InvalidGeometry(
            "map, metric and mesh disagree".into(),
        ));
    }
    let k = map.l + 1;
    let n = mesh.dim();
    let half_p = p / T::lit(2.0);
    let mut grad = if with_grad {
        vec![T::zero(); map.values.len()]
    } else {
        Vec::new()
    };
    let mut diffs = [T::zero(); 9];
    let mut e = T::zero();
    for (c, g) in geo.iter().enumerate() {
        cell_diffs(mesh, map, c, &mut diffs);
        let s = trace_density(g, &diffs, k);
        e += s.powf(half_p) * g.volume;
        if !with_grad || !(s > T::zero()) {
            continue;
        }
        let w = g.volume * p * s.powf(half_p - T::one());
        let cell = mesh.cell(c);
        for i in 0..n {
            for a in 0..k {
                let gi: T = (0..n)
                    .map(|j| g.inv_metric.get(i, j) * diffs[j * k + a])
                    .sum::<T>()
                    * w;
                grad[cell[i + 1] * k + a] += gi;
                grad[cell[0] * k + a] -= gi;
            }
        }
    }
    Ok((e, grad))
}

/// Degree of `v(x, .)` before rounding: signed image volume over `|S^l|`.
pub fn fiber_degree_raw<T: Scalar>(map: &SphereMap<T>, mesh: &Mesh<T>, x: usize) -> Result<T> {
    let fib = fibration(mesh)?;
    if x >= fib.base_count() {
        return Err(Error::InvalidGeometry(format!(
            "no fiber over base vertex {x}"
        )));
    }
    if map.l != fib.l() || map.len() != mesh.num_vertices() {
        return Err(Error::InvalidGeometry(
            "map does not match the fibration".into(),
        ));
    }
    let consts = SphereConstants::<T>::new(fib.l())?;
    let two = T::lit(2.0);
    let total: T = fib
        .fiber_cells()
        .map(|f| {
            let p = |i: usize| map.vertex(fib.vertex(x, f[i]));
            match fib.l() {
                1 => {
                    let (a, b) = (p(0), p(1));
                    (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1])
                }
                _ => {
                    let (a, b, c) = (p(0), p(1), p(2));
                    let triple = a[0] * (b[1] * c[2] - b[2] * c[1])
                        - a[1] * (b[0] * c[2] - b[2] * c[0])
                        + a[2] * (b[0] * c[1] - b[1] * c[0]);
                    let dot = |u: &[T], v: &[T]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
                    two * triple.atan2(T::one() + dot(a, b) + dot(b, c) + dot(c, a))
                }
            }
        })
        .sum();
    Ok(total / consts.vol)
}

/// Integer degree of `v(x, .)`; fails when the raw value is not within
/// `0.1` of an integer.
pub fn fiber_degree<T: Scalar>(map: &SphereMap<T>, mesh: &Mesh<T>, x: usize) -> Result<i64> {
    let raw = fiber_degree_raw(map, mesh, x)?;
    let r = raw.round();
    if (raw - r).abs() >= T::lit(0.1) {
        return Err(Error::DegreeIllConditioned {
            fiber: x,
            raw: raw.to_f64_lossy(),
        });
    }
    Ok(r.to_i64().unwrap_or(i64::MAX))
}

fn all_degrees<T: Scalar>(map: &SphereMap<T>, mesh: &Mesh<T>) -> Result<Vec<i64>> {
    let fib = fibration(mesh)?;
    (0..fib.base_count())
        .map(|x| fiber_degree(map, mesh, x))
        .collect()
}

/// `vol_N |S^l| l^{(n+l)/2}`, the energy of the projection `N x S^l -> S^l`.
pub fn lower_bound<T: Scalar>(vol_n: T, l: usize, n: usize) -> Result<T> {
    let c = SphereConstants::<T>::new(l)?;
    Ok(vol_n * c.vol * c.lambda1.powf(T::of_usize(n + l) / T::lit(2.0)))
}

/// Every term of the product energy bound for a map `N x S^l -> S^l`.
#[derive(Clone, Debug)]
pub struct BoundReport<T> {
    /// `(n+l)`-energy of the map.
    pub energy: T,
    /// Per fiber: `int_{S^l} |d^{S^l} v|^l`.
    pub fiber_energy: Vec<T>,
    pub fiber_degree: Vec<i64>,
    /// `E - A^{-n/l} sum_x m_x B_x^{(n+l)/l}`.
    pub holder_slack: T,
    /// `A^{-n/l} sum_x m_x (B_x^q - (A l^{l/2} |deg_x|)^q)`, `q = (n+l)/l`.
    pub degree_slack: T,
    /// `sum_x m_x A l^{(n+l)/2} |deg_x|^q`.
    pub bound: T,
    /// Discrete fiber volume `A` used in place of `|S^l|`.
    pub fiber_volume: T,
    pub holder_equality: bool,
    pub degree_equality: bool,
}

impl<T: Scalar> BoundReport<T> {
    pub const CSV_HEADER: &'static str =
        "E,holder_slack,degree_slack,bound,min_fiber_degree,max_fiber_degree";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.12e},{:.6e},{:.6e},{:.12e},{},{}",
            self.energy.to_f64_lossy(),
            self.holder_slack.to_f64_lossy(),
            self.degree_slack.to_f64_lossy(),
            self.bound.to_f64_lossy(),
            self.fiber_degree.iter().min().copied().unwrap_or(0),
            self.fiber_degree.iter().max().copied().unwrap_or(0)
        )
    }
}

/// Evaluates the chain
/// `E >= A^{-n/l} sum m_x B_x^q >= A^{-n/l} sum m_x (A l^{l/2} |deg|)^q`
/// fiber by fiber. The fiber volume `A` is the discrete (chordal) one, so the
/// projection attains both equalities exactly at every resolution.
pub fn verify_bound_chain<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    map: &SphereMap<T>,
) -> Result<BoundReport<T>> {
    check_sizes(mesh, metric, map)?;
    let fib = fibration(mesh)?;
    let l = fib.l();
    let n = fib.base_dim();
    let lt = T::of_usize(l);
    let q = T::of_usize(n + l) / lt;
    let energy = sphere_energy(mesh, metric, map, T::of_usize(n + l))?;
    let fiber_geo: Vec<CellGeometry<T>> = fib
        .fiber_metric()
        .iter()
        .map(|g| {
            let fact: usize = (1..=l).product();
            CellGeometry {
                volume: g.det().sqrt() / T::of_usize(fact),
                inv_metric: g.inverse(),
            }
        })
        .collect();
    let area: T = fiber_geo.iter().map(|g| g.volume).sum();
    let degrees = all_degrees(map, mesh)?;
    let k = l + 1;
    let half_l = lt / T::lit(2.0);
    let mut diffs = [T::zero(); 9];
    let mut fiber_energy = Vec::with_capacity(fib.base_count());
    for x in 0..fib.base_count() {
        let mut b = T::zero();
        for (f, g) in fib.fiber_cells().zip(&fiber_geo) {
            let v0 = map.vertex(fib.vertex(x, f[0]));
            for i in 0..l {
                let vi = map.vertex(fib.vertex(x, f[i + 1]));
                for a in 0..k {
                    diffs[i * k + a] = vi[a] - v0[a];
                }
            }
            b += trace_density(g, &diffs, k).powf(half_l) * g.volume;
        }
        fiber_energy.push(b);
    }
    let norm = area.powf(-T::of_usize(n) / lt);
    let mut holder = T::zero();
    let mut degree_term = T::zero();
    for x in 0..fib.base_count() {
        let m = fib.base_mass()[x];
        holder += m * fiber_energy[x].powf(q);
        let d = T::lit(degrees[x].unsigned_abs() as f64);
        degree_term += m * (area * lt.powf(half_l) * d).powf(q);
    }
    let holder_slack = energy - norm * holder;
    let degree_slack = norm * (holder - degree_term);
    let rel = T::lit(1e-3) * energy.abs();
    Ok(BoundReport {
        energy,
        fiber_energy,
        fiber_degree: degrees,
        holder_slack,
        degree_slack,
        bound: norm * degree_term,
        fiber_volume: area,
        holder_equality: holder_slack.abs() < rel,
        degree_equality: degree_slack.abs() < rel,
    })
}

/// Result of [`minimize_sphere`]. A degree change is reported in `drift`
/// rather than aborting, so the run's data stays available.
#[derive(Clone, Debug)]
pub struct SphereRun<T> {
    pub map: SphereMap<T>,
    /// Energy before the first step and after every accepted step.
    pub trace: Vec<T>,
    pub accepted: usize,
    pub drift: Option<Error>,
}

/// Projected gradient descent: each step moves every vertex along the
/// negative tangential gradient (scaled by the inverse lumped mass) and
/// renormalizes. The step starts at `step_size` and is halved until the
/// energy does not increase; descent stops early when no step is accepted.
pub fn minimize_sphere<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    init: &SphereMap<T>,
    p: T,
    steps: usize,
    step_size: T,
) -> Result<SphereRun<T>> {
    check_sizes(mesh, metric, init)?;
    let geo = cell_geometry(metric)?;
    let mass = lumped_mass(mesh, metric);
    let k = init.l + 1;
    let degrees_before = match mesh.fibration() {
        Some(_) => Some(all_degrees(init, mesh)?),
        None => None,
    };
    let mut map = init.clone();
    let (mut e, mut grad) = energy_and_gradient(mesh, &geo, &map, p, true)?;
    let mut trace = vec![e];
    let mut accepted = 0;
    for _ in 0..steps {
        let mut dir = vec![T::zero(); grad.len()];
        for v in 0..map.len() {
            let x = map.vertex(v);
            let g = &grad[v * k..(v + 1) * k];
            let radial: T = (0..k).map(|a| g[a] * x[a]).sum();
            for a in 0..k {
                dir[v * k + a] = -(g[a] - radial * x[a]) / mass[v];
            }
        }
        let mut alpha = step_size;
        let mut next = None;
        for _ in 0..40 {
            let values: Vec<T> = map
                .values
                .iter()
                .zip(&dir)
                .map(|(x, d)| *x + alpha * *d)
                .collect();
            let cand = SphereMap::normalized(map.l, values)?;
            let (ec, gc) = energy_and_gradient(mesh, &geo, &cand, p, true)?;
            if ec <= e {
                next = Some((cand, ec, gc));
                break;
            }
            alpha /= T::lit(2.0);
        }
        let Some((cand, ec, gc)) = next else { break };
        map = cand;
        e = ec;
        grad = gc;
        trace.push(e);
        accepted += 1;
    }
    let drift = match degrees_before {
        Some(before) => {
            let after = all_degrees(&map, mesh);
            match after {
                Ok(after) => before
                    .iter()
                    .zip(&after)
                    .enumerate()
                    .find(|(_, (b, a))| b != a)
                    .map(|(fiber, (b, a))| Error::DegreeDrift {
                        fiber,
                        before: *b,
                        after: *a,
                    }),
                Err(err) => Some(err),
            }
        }
        None => None,
    };
    Ok(SphereRun {
        map,
        trace,
        accepted,
        drift,
    })
}
