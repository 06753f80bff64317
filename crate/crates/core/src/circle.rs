//! Circle-valued maps as closed 1-forms `theta = theta0 + d phi` with fixed
//! periods, and minimization of the regularized p-energy.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::{
    cell_geometry, lumped_mass, CellGeometry, Cochain0, Cochain1, Mesh, MetricField,
};
use crate::optim::{lbfgs, LbfgsOptions, Termination};
use crate::scalar::Scalar;

/// Cohomology class of a circle map: integer winding per generator and a
/// closed representative `theta0` with periods `2 pi w`.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleClass<T> {
    winding: Vec<i64>,
    theta0: Cochain1<T>,
}

impl<T: Scalar> CircleClass<T> {
    pub fn winding(&self) -> &[i64] {
        &self.winding
    }

    pub fn theta0(&self) -> &Cochain1<T> {
        &self.theta0
    }

    pub fn is_zero(&self) -> bool {
        self.winding.iter().all(|&w| w == 0)
    }
}

/// Builds `theta0 = 2 pi sum_a w_a dx_a / P_a` from the periodic chart axes.
/// On a mapping torus the only periodic axis is the circle direction.
pub fn class_from_winding<T: Scalar>(mesh: &Mesh<T>, winding: &[i64]) -> Result<CircleClass<T>> {
    let chart = mesh
        .chart()
        .ok_or_else(|| Error::UnsupportedTopology("mesh has no periodic chart".into()))?;
    let periodic: Vec<(usize, T)> = chart
        .periods()
        .iter()
        .enumerate()
        .filter_map(|(a, p)| p.map(|p| (a, p)))
        .collect();
    if periodic.is_empty() {
        return Err(Error::UnsupportedTopology(
            "no periodic directions detected".into(),
        ));
    }
    if periodic.len() != winding.len() {
        return Err(Error::UnsupportedTopology(format!(
            "winding vector has {} entries but the mesh has {} generators",
            winding.len(),
            periodic.len()
        )));
    }
    let axes = chart.axes();
    let disp = mesh.edge_displacements().unwrap();
    let two_pi = T::PI() + T::PI();
    let theta0 = (0..mesh.num_edges())
        .map(|e| {
            periodic
                .iter()
                .zip(winding)
                .map(|(&(a, p), &w)| two_pi * T::lit(w as f64) * disp[e * axes + a] / p)
                .sum()
        })
        .collect();
    Ok(CircleClass {
        winding: winding.to_vec(),
        theta0: Cochain1(theta0),
    })
}

/// A circle-valued map `u = exp(i alpha)` with `d alpha = theta0 + d phi`.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleMap<T> {
    class: CircleClass<T>,
    phi: Cochain0<T>,
}

impl<T: Scalar> CircleMap<T> {
    pub fn new(class: CircleClass<T>, phi: Cochain0<T>) -> Self {
        Self { class, phi }
    }

    pub fn linear(class: CircleClass<T>, num_vertices: usize) -> Self {
        Self::new(class, Cochain0::zeros(num_vertices))
    }

    pub fn class(&self) -> &CircleClass<T> {
        &self.class
    }

    pub fn phi(&self) -> &Cochain0<T> {
        &self.phi
    }

    pub fn theta(&self, mesh: &Mesh<T>) -> Cochain1<T> {
        self.class.theta0.add(&self.phi.d(mesh))
    }

    /// Subtracts the mass-weighted mean of `phi`.
    pub fn gauge_fixed(mut self, mass: &[T]) -> Self {
        let mean = weighted_mean(&self.phi.0, mass);
        self.phi.0.iter_mut().for_each(|v| *v -= mean);
        self
    }

    /// Angle `alpha` at every vertex, integrated along a breadth-first tree
    /// from vertex 0 with `alpha(0) = phi(0)`. Defined modulo `2 pi`.
    pub fn angles(&self, mesh: &Mesh<T>) -> Vec<T> {
        let theta = self.theta(mesh);
        let adj = mesh.neighbors();
        let mut alpha = vec![T::nan(); mesh.num_vertices()];
        alpha[0] = self.phi.0[0];
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if alpha[v].is_nan() {
                    alpha[v] = alpha[u] + theta.oriented(mesh, u, v).unwrap();
                    queue.push_back(v);
                }
            }
        }
        alpha
    }

    /// The two real components `(cos alpha, sin alpha)` of the map.
    pub fn components(&self, mesh: &Mesh<T>) -> [Vec<T>; 2] {
        let alpha = self.angles(mesh);
        [
            alpha.iter().map(|a| a.cos()).collect(),
            alpha.iter().map(|a| a.sin()).collect(),
        ]
    }

    /// Text dump: `winding w_1 ... w_k`, then `vertex_id phi` per line.
    pub fn dump(&self) -> String {
        let mut out = String::from("winding");
        for w in &self.class.winding {
            write!(out, " {w}").unwrap();
        }
        out.push('\n');
        for (v, p) in self.phi.0.iter().enumerate() {
            writeln!(out, "{v} {p}").unwrap();
        }
        out
    }

    pub fn load(mesh: &Mesh<T>, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty circle map".into()))?;
        let mut head = header.split_whitespace();
        if head.next() != Some("winding") {
            return Err(Error::Parse("expected `winding` header".into()));
        }
        let winding = head
            .map(|w| {
                w.parse::<i64>()
                    .map_err(|e| Error::Parse(format!("winding: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let class = class_from_winding(mesh, &winding)?;
        let mut phi = vec![T::nan(); mesh.num_vertices()];
        for line in lines {
            let mut parts = line.split_whitespace();
            let (Some(v), Some(p), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("bad map line `{line}`")));
            };
            let v: usize = v
                .parse()
                .map_err(|_| Error::Parse(format!("bad vertex id `{v}`")))?;
            let p: T = p
                .parse()
                .map_err(|_| Error::Parse(format!("bad value `{p}`")))?;
            *phi.get_mut(v)
                .ok_or_else(|| Error::Parse(format!("vertex {v} out of range")))? = p;
        }
        if phi.iter().any(|p| p.is_nan()) {
            return Err(Error::Parse("missing vertex values".into()));
        }
        Ok(Self::new(class, Cochain0(phi)))
    }
}

fn weighted_mean<T: Scalar>(v: &[T], w: &[T]) -> T {
    let total: T = w.iter().copied().sum();
    v.iter().zip(w).map(|(a, b)| *a * *b).sum::<T>() / total
}

/// Per-cell `theta` components on the edges `(v_0, v_i)`.
fn cell_components<T: Scalar>(mesh: &Mesh<T>, theta: &Cochain1<T>, c: usize) -> [T; 3] {
    let mut a = [T::zero(); 3];
    for i in 0..mesh.dim() {
        a[i] = theta.on_cell_edge(mesh, c, i + 1);
    }
    a
}

fn sq_norm<T: Scalar>(geo: &CellGeometry<T>, a: &[T; 3]) -> T {
    let n = geo.inv_metric.dim();
    geo.inv_metric.bilinear(&a[..n], &a[..n])
}

/// Per-cell density `|theta|_g^2`.
pub fn density<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    map: &CircleMap<T>,
) -> Result<Vec<T>> {
    let geo = cell_geometry(metric)?;
    let theta = map.theta(mesh);
    Ok((0..mesh.num_cells())
        .map(|c| sq_norm(&geo[c], &cell_components(mesh, &theta, c)))
        .collect())
}

/// Minimum over cells of `|theta|_g`.
pub fn min_density<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    map: &CircleMap<T>,
) -> Result<T> {
    Ok(density(mesh, metric, map)?
        .into_iter()
        .fold(T::infinity(), T::min)
        .max(T::zero())
        .sqrt())
}

/// `sum_c (|theta|^2 + eps^2)^{p/2} vol_c`.
pub fn p_energy<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    map: &CircleMap<T>,
    p: T,
    eps: T,
) -> Result<T> {
    let problem = Problem::new(mesh, metric, map.class(), p)?;
    Ok(problem.energy(&map.phi.0, eps))
}

/// Gradient of [`p_energy`] with respect to the vertex potential `phi`.
pub fn p_energy_gradient<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    map: &CircleMap<T>,
    p: T,
    eps: T,
) -> Result<Cochain0<T>> {
    let problem = Problem::new(mesh, metric, map.class(), p)?;
    Ok(Cochain0(problem.energy_gradient(&map.phi.0, eps).1))
}

/// Energy evaluation with cached geometry and `theta0` components.
struct Problem<'a, T> {
    mesh: &'a Mesh<T>,
    geo: Vec<CellGeometry<T>>,
    base: Vec<[T; 3]>,
    p: T,
}

impl<'a, T: Scalar> Problem<'a, T> {
    fn new(
        mesh: &'a Mesh<T>,
        metric: &MetricField<T>,
        class: &CircleClass<T>,
        p: T,
    ) -> Result<Self> {
        if metric.len() != mesh.num_cells() {
            return Err(Error::InvalidGeometry(
                "metric does not match the mesh".into(),
            ));
        }
        if class.theta0.0.len() != mesh.num_edges() {
            return Err(Error::ClassMismatch);
        }
        let geo = cell_geometry(metric)?;
        let base = (0..mesh.num_cells())
            .map(|c| cell_components(mesh, &class.theta0, c))
            .collect();
        Ok(Self { mesh, geo, base, p })
    }

    fn local(&self, c: usize, phi: &[T]) -> [T; 3] {
        let cell = self.mesh.cell(c);
        let mut a = self.base[c];
        for i in 0..self.mesh.dim() {
            a[i] += phi[cell[i + 1]] - phi[cell[0]];
        }
        a
    }

    fn energy(&self, phi: &[T], eps: T) -> T {
        let half_p = self.p / T::lit(2.0);
        (0..self.geo.len())
            .map(|c| {
                let s = sq_norm(&self.geo[c], &self.local(c, phi)) + eps * eps;
                s.powf(half_p) * self.geo[c].volume
            })
            .sum()
    }

    fn energy_gradient(&self, phi: &[T], eps: T) -> (T, Vec<T>) {
        let n = self.mesh.dim();
        let half_p = self.p / T::lit(2.0);
        let mut grad = vec![T::zero(); phi.len()];
        let mut e = T::zero();
        let mut ga = [T::zero(); 3];
        for c in 0..self.geo.len() {
            let a = self.local(c, phi);
            let geo = &self.geo[c];
            let s = sq_norm(geo, &a) + eps * eps;
            e += s.powf(half_p) * geo.volume;
            // d/da of vol * s^{p/2} is vol * p * s^{p/2-1} * G^{-1} a
            let w = if s > T::zero() {
                geo.volume * self.p * s.powf(half_p - T::one())
            } else {
                T::zero()
            };
            geo.inv_metric.apply(&a[..n], &mut ga[..n]);
            let cell = self.mesh.cell(c);
            for i in 0..n {
                let gi = w * ga[i];
                grad[cell[i + 1]] += gi;
                grad[cell[0]] -= gi;
            }
        }
        (e, grad)
    }

    /// Diagonal of the stiffness weighted by `p s^{p/2-1}`, inverted.
    fn jacobi(&self, phi: &[T], eps: T) -> Vec<T> {
        let n = self.mesh.dim();
        let half_p = self.p / T::lit(2.0);
        let mut diag = vec![T::zero(); phi.len()];
        for c in 0..self.geo.len() {
            let geo = &self.geo[c];
            let s = sq_norm(geo, &self.local(c, phi)) + eps * eps;
            let w = geo.volume * self.p * s.max(T::eps()).powf(half_p - T::one());
            let g = &geo.inv_metric;
            let cell = self.mesh.cell(c);
            let mut total = T::zero();
            for i in 0..n {
                let mut row = T::zero();
                for j in 0..n {
                    row += g.get(i, j);
                }
                diag[cell[i + 1]] += w * g.get(i, i);
                total += row;
            }
            diag[cell[0]] += w * total;
        }
        diag.into_iter()
            .map(|d| {
                if d > T::zero() {
                    T::one() / d
                } else {
                    T::one()
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions<T> {
    /// Stopping threshold: `max_v |g_v| / m_v <= tol (1 + |E|)`.
    pub tol: T,
    pub eps_start: T,
    pub eps_end: T,
    pub eps_factor: T,
    pub max_iter: usize,
    pub memory: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8),
            eps_start: T::lit(1e-1),
            eps_end: T::lit(1e-6),
            eps_factor: T::lit(10.0),
            max_iter: 5000,
            memory: 10,
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn schedule(&self) -> Vec<T> {
        let mut out = Vec::new();
        let mut eps = self.eps_start;
        let stop = self.eps_end * (T::one() + T::lit(1e-6));
        while eps > stop {
            out.push(eps);
            eps /= self.eps_factor;
        }
        out.push(self.eps_end);
        out
    }
}

/// One stage of the regularization continuation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageRecord<T> {
    pub eps: T,
    /// Regularized energy at the end of the stage.
    pub energy: T,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    /// Unregularized energy of the returned map.
    pub energy: T,
    pub iterations: usize,
    /// Mass-scaled sup-norm of the unregularized gradient.
    pub gradient: T,
    pub trace: Vec<StageRecord<T>>,
    pub min_density: T,
    pub max_density: T,
}

/// Minimizes the p-energy in `class`, starting from the linear representative.
pub fn minimize<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    class: &CircleClass<T>,
    p: T,
    opts: &SolverOptions<T>,
) -> Result<(CircleMap<T>, SolveReport<T>)> {
    minimize_from(
        mesh,
        metric,
        &CircleMap::linear(class.clone(), mesh.num_vertices()),
        p,
        opts,
    )
}

/// Minimizes the p-energy in the class of `init`, warm-started from `init`.
///
/// If `init` already meets the stopping test at the final regularization the
/// continuation is skipped.
pub fn minimize_from<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    init: &CircleMap<T>,
    p: T,
    opts: &SolverOptions<T>,
) -> Result<(CircleMap<T>, SolveReport<T>)> {
    if init.phi.0.len() != mesh.num_vertices() {
        return Err(Error::ClassMismatch);
    }
    let problem = Problem::new(mesh, metric, init.class(), p)?;
    let mass = lumped_mass(mesh, metric);
    let dual_sup = |g: &[T]| {
        g.iter()
            .zip(&mass)
            .fold(T::zero(), |m, (gi, mi)| m.max(gi.abs() / *mi))
    };
    let lopts = LbfgsOptions {
        memory: opts.memory,
        max_iter: opts.max_iter,
        ..LbfgsOptions::default()
    };
    let mut phi = init.phi.0.clone();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let schedule = opts.schedule();
    let last_eps = *schedule.last().unwrap();
    let (e0, g0) = problem.energy_gradient(&phi, last_eps);
    let stages: &[T] = if dual_sup(&g0) <= opts.tol * (T::one() + e0.abs()) {
        &schedule[schedule.len() - 1..]
    } else {
        &schedule
    };
    for (k, &eps) in stages.iter().enumerate() {
        let last = k + 1 == stages.len();
        let tol = if last {
            opts.tol
        } else {
            opts.tol.max(T::lit(1e-6))
        };
        let pre = problem.jacobi(&phi, eps);
        let out = lbfgs(
            phi,
            &pre,
            |x| problem.energy_gradient(x, eps),
            |e, g| dual_sup(g) <= tol * (T::one() + e.abs()),
            &lopts,
        );
        iterations += out.iterations;
        trace.push(StageRecord {
            eps,
            energy: out.value,
            iterations: out.iterations,
        });
        phi = out.x;
        if last && out.termination != Termination::Converged {
            return Err(Error::NoConvergence {
                iterations,
                energy: out.value.to_f64_lossy(),
                gradient: dual_sup(&out.grad).to_f64_lossy(),
            });
        }
    }
    let map = CircleMap::new(init.class.clone(), Cochain0(phi)).gauge_fixed(&mass);
    let (energy, grad) = problem.energy_gradient(&map.phi.0, T::zero());
    let dens = density(mesh, metric, &map)?;
    let report = SolveReport {
        energy,
        iterations,
        gradient: dual_sup(&grad),
        trace,
        min_density: dens.iter().copied().fold(T::infinity(), T::min),
        max_density: dens.iter().copied().fold(T::zero(), T::max),
    };
    Ok((map, report))
}

/// Optimal constant phase `c` with `phi_b ~ phi_a + c` (mass-weighted mean of
/// `phi_b - phi_a`) and the remaining sup-distance `max |phi_b - phi_a - c|`.
pub fn align_rotation<T: Scalar>(a: &CircleMap<T>, b: &CircleMap<T>, mass: &[T]) -> Result<(T, T)> {
    if a.class.winding != b.class.winding || a.phi.0.len() != b.phi.0.len() {
        return Err(Error::ClassMismatch);
    }
    let diff: Vec<T> = b.phi.0.iter().zip(&a.phi.0).map(|(x, y)| *x - *y).collect();
    let phase = weighted_mean(&diff, mass);
    let dist = diff
        .iter()
        .fold(T::zero(), |m, d| m.max((*d - phase).abs()));
    Ok((phase, dist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_flat_torus;

    #[test]
    fn schedule_spans_decades() {
        let s = SolverOptions::<f64>::default().schedule();
        assert_eq!(s.len(), 6);
        assert!((s[5] - 1e-6).abs() < 1e-20);
    }

    #[test]
    fn zero_class_has_zero_energy() {
        let (m, g) = build_flat_torus::<f64>(&[1.0, 1.0], &[4, 4]).unwrap();
        let class = class_from_winding(&m, &[0, 0]).unwrap();
        assert!(class.is_zero());
        assert!(class.theta0().0.iter().all(|v| *v == 0.0));
        let map = CircleMap::linear(class, m.num_vertices());
        assert_eq!(p_energy(&m, &g, &map, 2.0, 0.0).unwrap(), 0.0);
        assert_eq!(min_density(&m, &g, &map).unwrap(), 0.0);
    }

    #[test]
    fn wrong_winding_length() {
        let (m, _) = build_flat_torus::<f64>(&[1.0, 1.0], &[4, 4]).unwrap();
        assert_eq!(
            class_from_winding(&m, &[1]).unwrap_err().name(),
            "UnsupportedTopology"
        );
    }
}
