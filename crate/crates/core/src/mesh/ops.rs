use super::{Mesh, MetricField};
use crate::error::{Error, Result};
use crate::linalg::{Csr, SmallSym};
use crate::scalar::Scalar;

/// Per-cell geometry used by every energy: volume and inverse Gram matrix.
/// The gradient of a piecewise-linear function with nodal values `f` has
/// edge-basis components `a_i = f(v_i) - f(v_0)` and squared norm
/// `a^T G^{-1} a`.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry<T> {
    pub volume: T,
    pub inv_metric: SmallSym<T>,
}

/// First-order finite-element operators of a mesh with metric.
#[derive(Clone, Debug)]
pub struct Operators<T> {
    pub cells: Vec<CellGeometry<T>>,
    /// `K_ij = \int <d psi_i, d psi_j>`; symmetric, kernel = constants.
    pub stiffness: Csr<T>,
    /// Row-sum lumped mass, one entry per vertex.
    pub mass: Vec<T>,
    /// Coboundary from vertices to edges, `(d f)(a -> b) = f(b) - f(a)`.
    pub d0: Csr<T>,
}

impl<T: Scalar> Operators<T> {
    pub fn total_mass(&self) -> T {
        self.mass.iter().copied().sum()
    }
}

pub fn cell_geometry<T: Scalar>(metric: &MetricField<T>) -> Result<Vec<CellGeometry<T>>> {
    metric.check_spd()?;
    Ok((0..metric.len())
        .map(|c| CellGeometry {
            volume: metric.cell_volume(c),
            inv_metric: metric.cell(c).inverse(),
        })
        .collect())
}

pub fn assemble_operators<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
) -> Result<Operators<T>> {
    if metric.len() != mesh.num_cells() || metric.dim() != mesh.dim() {
        return Err(Error::InvalidGeometry(
            "metric does not match the mesh".into(),
        ));
    }
    let cells = cell_geometry(metric)?;
    let n = mesh.dim();
    let nv = mesh.num_vertices();
    let mut trip = Vec::with_capacity(mesh.num_cells() * (n + 1) * (n + 1));
    let mut mass = vec![T::zero(); nv];
    let share = T::one() / T::of_usize(n + 1);
    for (c, geo) in cells.iter().enumerate() {
        let cell = mesh.cell(c);
        let local = local_stiffness(geo);
        for a in 0..=n {
            for b in a..=n {
                let v = local[a][b];
                trip.push((cell[a], cell[b], v));
                if a != b {
                    trip.push((cell[b], cell[a], v));
                }
            }
            mass[cell[a]] += geo.volume * share;
        }
    }
    let stiffness = Csr::from_triplets(nv, nv, &trip);
    let mut dtrip = Vec::with_capacity(2 * mesh.num_edges());
    for (e, [a, b]) in mesh.edges().iter().enumerate() {
        dtrip.push((e, *a, -T::one()));
        dtrip.push((e, *b, T::one()));
    }
    let d0 = Csr::from_triplets(mesh.num_edges(), nv, &dtrip);
    Ok(Operators {
        cells,
        stiffness,
        mass,
        d0,
    })
}

/// `vol * D^T G^{-1} D` with `D = [-1 | I]`.
fn local_stiffness<T: Scalar>(geo: &CellGeometry<T>) -> [[T; 4]; 4] {
    let g = &geo.inv_metric;
    let n = g.dim();
    let mut k = [[T::zero(); 4]; 4];
    let mut total = T::zero();
    for i in 0..n {
        let mut row = T::zero();
        for j in 0..n {
            k[i + 1][j + 1] = geo.volume * g.get(i, j);
            row += g.get(i, j);
        }
        k[0][i + 1] = -geo.volume * row;
        k[i + 1][0] = k[0][i + 1];
        total += row;
    }
    k[0][0] = geo.volume * total;
    k
}

/// Row-sum lumped mass without assembling the stiffness.
pub fn lumped_mass<T: Scalar>(mesh: &Mesh<T>, metric: &MetricField<T>) -> Vec<T> {
    let n = mesh.dim();
    let share = T::one() / T::of_usize(n + 1);
    let mut mass = vec![T::zero(); mesh.num_vertices()];
    for (c, cell) in mesh.cells().enumerate() {
        let v = metric.cell_volume(c) * share;
        for &x in cell {
            mass[x] += v;
        }
    }
    mass
}

/// Total volume: `sum_c sqrt(det G_c) / n!`.
pub fn volume<T: Scalar>(mesh: &Mesh<T>, metric: &MetricField<T>) -> T {
    debug_assert_eq!(mesh.num_cells(), metric.len());
    metric.volume()
}

/// Multiplies each cell metric by its factor `rho_c > 0`.
pub fn conformal_scale<T: Scalar>(metric: &MetricField<T>, rho: &[T]) -> Result<MetricField<T>> {
    if rho.len() != metric.len() {
        return Err(Error::InvalidGeometry(format!(
            "{} conformal factors for {} cells",
            rho.len(),
            metric.len()
        )));
    }
    if let Some((cell, r)) = rho
        .iter()
        .enumerate()
        .find(|(_, r)| !(**r > T::zero()) || !r.is_finite())
    {
        return Err(Error::DegenerateConformalFactor {
            cell,
            value: r.to_f64_lossy(),
        });
    }
    let cells = metric
        .cells()
        .iter()
        .zip(rho)
        .map(|(g, r)| g.scaled(*r))
        .collect();
    MetricField::new(metric.dim(), cells)
}

/// Real-valued function on vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Cochain0<T>(pub Vec<T>);

/// Real value per edge, stored for the orientation `(a, b)` with `a < b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cochain1<T>(pub Vec<T>);

impl<T: Scalar> Cochain0<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    /// Discrete differential.
    pub fn d(&self, mesh: &Mesh<T>) -> Cochain1<T> {
        Cochain1(
            mesh.edges()
                .iter()
                .map(|[a, b]| self.0[*b] - self.0[*a])
                .collect(),
        )
    }
}

impl<T: Scalar> Cochain1<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    /// Value on the edge traversed from `from` to `to`; antisymmetric in the
    /// orientation.
    pub fn oriented(&self, mesh: &Mesh<T>, from: usize, to: usize) -> Option<T> {
        let e = mesh.edge_index(from, to)?;
        Some(if from < to { self.0[e] } else { -self.0[e] })
    }

    /// Value on the edge `(v_0, v_i)` of `cell`.
    #[inline]
    pub fn on_cell_edge(&self, mesh: &Mesh<T>, cell: usize, i: usize) -> T {
        let (e, fwd) = mesh.cell_edge(cell, i);
        if fwd {
            self.0[e]
        } else {
            -self.0[e]
        }
    }

    /// Circulation around every 2-face, `theta(ab) + theta(bc) + theta(ca)`.
    /// Zero for closed cochains.
    pub fn face_circulations(&self, mesh: &Mesh<T>) -> Vec<T> {
        mesh.triangles()
            .iter()
            .map(|&[a, b, c]| {
                self.oriented(mesh, a, b).unwrap()
                    + self.oriented(mesh, b, c).unwrap()
                    + self.oriented(mesh, c, a).unwrap()
            })
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| *a + *b).collect())
    }
}
