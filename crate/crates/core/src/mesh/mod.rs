//! Closed simplicial manifolds with per-cell constant metrics.
//!
//! A [`Mesh`] stores the combinatorics (top-dimensional simplices, edges) plus
//! the bookkeeping its builder knows about: periodic coordinate lifts for flat
//! pieces ([`Chart`]) and the sphere-fiber slicing of products ([`SphereFibration`]).
//! All lengths, volumes and angles come from a separate [`MetricField`], which
//! stores for every cell the Gram matrix of its edge vectors `v_i - v_0`.

mod build;
mod io;
mod ops;
mod topology;

pub use build::{
    build_crossed_torus, build_flat_torus, build_icosphere, build_mapping_torus, build_product,
    build_round_circle, crossed_torus_quarter_turn, identity_permutation, torus_lattice_map,
};
pub use io::{dump_mesh, load_mesh};
pub use ops::{
    assemble_operators, cell_geometry, conformal_scale, lumped_mass, volume, CellGeometry,
    Cochain0, Cochain1, Operators,
};
pub use topology::Generator;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::SmallSym;
use crate::scalar::Scalar;

/// Periodic coordinate lifts. For every cell and each of its vertices the
/// builder records unwrapped flat coordinates, so edge displacements are
/// well defined across periodic seams.
#[derive(Clone, Debug)]
pub struct Chart<T> {
    pub(crate) axes: usize,
    pub(crate) coords: Vec<T>,
    pub(crate) periods: Vec<Option<T>>,
}

impl<T: Scalar> Chart<T> {
    pub fn axes(&self) -> usize {
        self.axes
    }

    /// Period of each axis; `None` for axes that do not close up into a
    /// generator of first cohomology (e.g. twisted fiber directions).
    pub fn periods(&self) -> &[Option<T>] {
        &self.periods
    }

    /// Lifted coordinates of local vertex `local` of `cell`.
    pub fn lift(&self, dim: usize, cell: usize, local: usize) -> &[T] {
        let base = (cell * (dim + 1) + local) * self.axes;
        &self.coords[base..base + self.axes]
    }
}

/// Slicing of `N x S^l` into sphere fibers `{x} x S^l`, one per vertex `x` of `N`.
/// A standalone sphere is the special case with a single base point.
#[derive(Clone, Debug)]
pub struct SphereFibration<T> {
    pub(crate) l: usize,
    /// Fiber simplices with consistent (outward) orientation.
    pub(crate) fiber_cells: Vec<usize>,
    /// Unit vectors in R^{l+1}, one per fiber vertex.
    pub(crate) positions: Vec<T>,
    /// Fiber metric, Gram matrices in the orientation order of `fiber_cells`.
    pub(crate) fiber_metric: Vec<SmallSym<T>>,
    /// Lumped mass of each base vertex (1 for a standalone sphere).
    pub(crate) base_mass: Vec<T>,
    pub(crate) base_dim: usize,
    pub(crate) base_stride: usize,
    pub(crate) fiber_stride: usize,
}

impl<T: Scalar> SphereFibration<T> {
    pub fn l(&self) -> usize {
        self.l
    }
    pub fn base_count(&self) -> usize {
        self.base_mass.len()
    }
    pub fn fiber_vertex_count(&self) -> usize {
        self.positions.len() / (self.l + 1)
    }
    pub fn base_dim(&self) -> usize {
        self.base_dim
    }
    pub fn base_mass(&self) -> &[T] {
        &self.base_mass
    }
    pub fn fiber_cells(&self) -> impl Iterator<Item = &[usize]> {
        self.fiber_cells.chunks(self.l + 1)
    }
    pub fn fiber_cell_count(&self) -> usize {
        self.fiber_cells.len() / (self.l + 1)
    }
    pub fn fiber_metric(&self) -> &[SmallSym<T>] {
        &self.fiber_metric
    }
    pub fn position(&self, f: usize) -> &[T] {
        &self.positions[f * (self.l + 1)..(f + 1) * (self.l + 1)]
    }
    /// Mesh vertex id of fiber vertex `f` over base vertex `x`.
    pub fn vertex(&self, x: usize, f: usize) -> usize {
        x * self.base_stride + f * self.fiber_stride
    }
}

/// Simplicial complex of dimension 1..=3.
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    dim: usize,
    num_vertices: usize,
    cells: Vec<usize>,
    edges: Vec<[usize; 2]>,
    /// For each cell, the edges `(v_0, v_i)`, `i = 1..=dim`, with `true` when
    /// the stored edge runs from `v_0` to `v_i`.
    cell_edges: Vec<(usize, bool)>,
    pub(crate) chart: Option<Chart<T>>,
    pub(crate) fibration: Option<SphereFibration<T>>,
}

impl<T: Scalar> Mesh<T> {
    /// Builds a mesh from flat cell connectivity and checks the closed-manifold
    /// invariants: distinct vertices per cell, every facet shared by exactly
    /// two cells, and connectivity.
    pub fn new(dim: usize, num_vertices: usize, cells: Vec<usize>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !cells.len().is_multiple_of(dim + 1) || cells.is_empty() {
            return Err(Error::InvalidGeometry("cell array length".into()));
        }
        if let Some(&v) = cells.iter().find(|&&v| v >= num_vertices) {
            return Err(Error::InvalidGeometry(format!(
                "vertex id {v} out of range"
            )));
        }
        let mut pairs = Vec::new();
        for cell in cells.chunks(dim + 1) {
            for i in 0..=dim {
                for j in (i + 1)..=dim {
                    if cell[i] == cell[j] {
                        return Err(Error::InvalidGeometry(format!(
                            "cell {cell:?} repeats a vertex"
                        )));
                    }
                    pairs.push([cell[i].min(cell[j]), cell[i].max(cell[j])]);
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let edges = pairs;
        let mut cell_edges = Vec::with_capacity(cells.len() / (dim + 1) * dim);
        for cell in cells.chunks(dim + 1) {
            for i in 1..=dim {
                let (a, b) = (cell[0], cell[i]);
                let key = [a.min(b), a.max(b)];
                let e = edges.binary_search(&key).expect("edge present");
                cell_edges.push((e, a < b));
            }
        }
        let mesh = Self {
            dim,
            num_vertices,
            cells,
            edges,
            cell_edges,
            chart: None,
            fibration: None,
        };
        mesh.check_closed()?;
        mesh.check_connected()?;
        Ok(mesh)
    }

    fn check_closed(&self) -> Result<()> {
        let mut faces: HashMap<Vec<usize>, usize> = HashMap::new();
        for cell in self.cells() {
            for skip in 0..=self.dim {
                let mut f: Vec<usize> = (0..=self.dim)
                    .filter(|&k| k != skip)
                    .map(|k| cell[k])
                    .collect();
                f.sort_unstable();
                *faces.entry(f).or_insert(0) += 1;
            }
        }
        if let Some((f, c)) = faces.iter().find(|(_, &c)| c != 2) {
            return Err(Error::InvalidGeometry(format!(
                "facet {f:?} is shared by {c} cells; the complex is not closed"
            )));
        }
        Ok(())
    }

    fn check_connected(&self) -> Result<()> {
        let mut parent: Vec<usize> = (0..self.num_vertices).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for [a, b] in &self.edges {
            let (ra, rb) = (find(&mut parent, *a), find(&mut parent, *b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        let root = find(&mut parent, 0);
        if (0..self.num_vertices).any(|v| find(&mut parent, v) != root) {
            return Err(Error::InvalidGeometry("mesh is not connected".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }
    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c * (self.dim + 1)..(c + 1) * (self.dim + 1)]
    }
    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.dim + 1)
    }
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
    /// Edge index and orientation flag for the edge `(v_0, v_i)` of `cell`.
    #[inline]
    pub fn cell_edge(&self, cell: usize, i: usize) -> (usize, bool) {
        self.cell_edges[cell * self.dim + (i - 1)]
    }
    /// Index of the edge joining `a` and `b`, if any.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&[a.min(b), a.max(b)]).ok()
    }
    pub fn chart(&self) -> Option<&Chart<T>> {
        self.chart.as_ref()
    }
    pub fn fibration(&self) -> Option<&SphereFibration<T>> {
        self.fibration.as_ref()
    }

    /// Distinct 2-faces (sorted vertex triples). Empty for curves.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut tris = Vec::new();
        for cell in self.cells() {
            for i in 0..=self.dim {
                for j in (i + 1)..=self.dim {
                    for k in (j + 1)..=self.dim {
                        let mut t = [cell[i], cell[j], cell[k]];
                        t.sort_unstable();
                        tris.push(t);
                    }
                }
            }
        }
        tris.sort_unstable();
        tris.dedup();
        tris
    }

    /// Vertex adjacency lists (sorted, via edges).
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for [a, b] in &self.edges {
            adj[*a].push(*b);
            adj[*b].push(*a);
        }
        adj
    }
}

/// Per-cell metric: for every top simplex, the symmetric positive-definite
/// Gram matrix of its edge vectors `v_i - v_0` (units: length squared).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField<T> {
    dim: usize,
    cells: Vec<SmallSym<T>>,
}

impl<T: Scalar> MetricField<T> {
    pub fn new(dim: usize, cells: Vec<SmallSym<T>>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if let Some((c, _)) = cells.iter().enumerate().find(|(_, g)| g.dim() != dim) {
            return Err(Error::InvalidGeometry(format!(
                "cell {c} metric has wrong size"
            )));
        }
        Ok(Self { dim, cells })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
    pub fn cell(&self, c: usize) -> &SmallSym<T> {
        &self.cells[c]
    }
    pub fn cells(&self) -> &[SmallSym<T>] {
        &self.cells
    }

    /// Volume of the reference simplex, `1/n!`.
    pub fn reference_volume(&self) -> T {
        match self.dim {
            1 => T::one(),
            2 => T::lit(0.5),
            _ => T::one() / T::lit(6.0),
        }
    }

    pub fn cell_volume(&self, c: usize) -> T {
        self.cells[c].det().max(T::zero()).sqrt() * self.reference_volume()
    }

    pub fn volume(&self) -> T {
        (0..self.cells.len()).map(|c| self.cell_volume(c)).sum()
    }

    /// Errors with `InvalidGeometry` at the first non-SPD cell.
    pub fn check_spd(&self) -> Result<()> {
        match self.cells.iter().position(|g| !g.is_spd()) {
            Some(c) => Err(Error::InvalidGeometry(format!(
                "metric of cell {c} is not positive definite"
            ))),
            None => Ok(()),
        }
    }

    /// Multiplies every cell by the same constant.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            dim: self.dim,
            cells: self.cells.iter().map(|g| g.scaled(c)).collect(),
        }
    }

    /// Maximum entrywise difference between two metrics on the same mesh.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(T::zero(), T::max)
    }
}

/// Gram matrix of a simplex after reordering its vertices: `order[k]` is the
/// old local index of new vertex `k`. Works through squared edge lengths, so
/// it is valid for any Gram matrix, not just ones with a known embedding.
pub fn reorder_gram<T: Scalar>(g: &SmallSym<T>, order: &[usize]) -> SmallSym<T> {
    let l2 = squared_lengths(g);
    let n = g.dim();
    let mut out = SmallSym::zeros(n);
    let half = T::lit(0.5);
    let o = order[0];
    for i in 1..=n {
        for j in i..=n {
            let v = half * (l2[o][order[i]] + l2[o][order[j]] - l2[order[i]][order[j]]);
            out.set(i - 1, j - 1, v);
        }
    }
    out
}

/// Squared distances between all pairs of local vertices of a simplex.
pub fn squared_lengths<T: Scalar>(g: &SmallSym<T>) -> [[T; 4]; 4] {
    let n = g.dim();
    let two = T::lit(2.0);
    let mut l2 = [[T::zero(); 4]; 4];
    let entry = |i: usize, j: usize| -> T {
        if i == 0 || j == 0 {
            T::zero()
        } else {
            g.get(i - 1, j - 1)
        }
    };
    for a in 0..=n {
        for b in 0..=n {
            l2[a][b] = entry(a, a) + entry(b, b) - two * entry(a, b);
        }
    }
    l2
}
