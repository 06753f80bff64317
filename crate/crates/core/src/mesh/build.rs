use std::collections::HashMap;

use super::{squared_lengths, Chart, Mesh, MetricField, SphereFibration};
use crate::error::{Error, Result};
use crate::linalg::SmallSym;
use crate::scalar::Scalar;

/// Flat torus `R^n / (P_1 Z x ... x P_n Z)`. Each grid cell is split into
/// `n!` Kuhn simplices, one per axis permutation in lexicographic order, with
/// vertices listed along the monotone lattice path.
pub fn build_flat_torus<T: Scalar>(
    periods: &[T],
    resolution: &[usize],
) -> Result<(Mesh<T>, MetricField<T>)> {
    let n = periods.len();
    if !(1..=3).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    if resolution.len() != n {
        return Err(Error::InvalidGeometry(format!(
            "{} periods but {} resolutions",
            n,
            resolution.len()
        )));
    }
    if let Some((axis, &r)) = resolution.iter().enumerate().find(|(_, &r)| r < 3) {
        return Err(Error::MeshTooCoarse {
            axis,
            resolution: r,
        });
    }
    if let Some(p) = periods
        .iter()
        .find(|p| !(**p > T::zero()) || !p.is_finite())
    {
        return Err(Error::InvalidGeometry(format!(
            "period {p} must be positive"
        )));
    }
    let h: Vec<T> = periods
        .iter()
        .zip(resolution)
        .map(|(p, &r)| *p / T::of_usize(r))
        .collect();
    let num_vertices: usize = resolution.iter().product();
    let vid = |idx: &[usize]| -> usize {
        let mut id = 0;
        for axis in (0..n).rev() {
            id = id * resolution[axis] + idx[axis] % resolution[axis];
        }
        id
    };
    let perms = permutations(n);
    let mut cells = Vec::with_capacity(num_vertices * perms.len() * (n + 1));
    let mut metric = Vec::with_capacity(num_vertices * perms.len());
    let mut coords = Vec::new();
    for corner in 0..num_vertices {
        let mut base = vec![0usize; n];
        let mut rem = corner;
        for axis in 0..n {
            base[axis] = rem % resolution[axis];
            rem /= resolution[axis];
        }
        for perm in &perms {
            let mut idx = base.clone();
            let mut lifts = vec![idx.clone()];
            for &axis in perm {
                idx[axis] += 1;
                lifts.push(idx.clone());
            }
            let phys: Vec<Vec<T>> = lifts
                .iter()
                .map(|l| (0..n).map(|a| T::of_usize(l[a]) * h[a]).collect())
                .collect();
            let edges: Vec<Vec<T>> = (1..=n)
                .map(|k| (0..n).map(|a| phys[k][a] - phys[0][a]).collect())
                .collect();
            for l in &lifts {
                cells.push(vid(l));
            }
            for p in &phys {
                coords.extend_from_slice(p);
            }
            metric.push(SmallSym::gram(&edges));
        }
    }
    let mut mesh = Mesh::new(n, num_vertices, cells)?;
    mesh.chart = Some(Chart {
        axes: n,
        coords,
        periods: periods.iter().map(|p| Some(*p)).collect(),
    });
    Ok((mesh, MetricField::new(n, metric)?))
}

/// Two-dimensional flat torus whose square cells are each split into four
/// triangles through the cell centre. Unlike the Kuhn split, this
/// triangulation is invariant under quarter turns of a square grid.
///
/// Corner `(i, j)` has id `i + N_0 j`; the centre of square `(i, j)` has id
/// `N_0 N_1 + i + N_0 j`.
pub fn build_crossed_torus<T: Scalar>(
    periods: [T; 2],
    resolution: [usize; 2],
) -> Result<(Mesh<T>, MetricField<T>)> {
    for axis in 0..2 {
        if resolution[axis] < 3 {
            return Err(Error::MeshTooCoarse {
                axis,
                resolution: resolution[axis],
            });
        }
        if !(periods[axis] > T::zero()) {
            return Err(Error::InvalidGeometry(format!(
                "period {} must be positive",
                periods[axis]
            )));
        }
    }
    let [n0, n1] = resolution;
    let h = [periods[0] / T::of_usize(n0), periods[1] / T::of_usize(n1)];
    let corner = |i: usize, j: usize| (i % n0) + n0 * (j % n1);
    let centre = |i: usize, j: usize| n0 * n1 + i + n0 * j;
    let half = T::lit(0.5);
    let mut cells = Vec::new();
    let mut metric = Vec::new();
    let mut coords = Vec::new();
    for j in 0..n1 {
        for i in 0..n0 {
            let c00 = [T::of_usize(i) * h[0], T::of_usize(j) * h[1]];
            let c10 = [T::of_usize(i + 1) * h[0], c00[1]];
            let c01 = [c00[0], T::of_usize(j + 1) * h[1]];
            let c11 = [c10[0], c01[1]];
            let m = [
                (T::of_usize(i) + half) * h[0],
                (T::of_usize(j) + half) * h[1],
            ];
            // corner-to-corner edges point along +x or +y; the centre is last
            let tris = [
                ([corner(i, j), corner(i + 1, j)], [c00, c10]),
                ([corner(i + 1, j), corner(i + 1, j + 1)], [c10, c11]),
                ([corner(i, j + 1), corner(i + 1, j + 1)], [c01, c11]),
                ([corner(i, j), corner(i, j + 1)], [c00, c01]),
            ];
            for (ids, pts) in tris {
                cells.extend_from_slice(&[ids[0], ids[1], centre(i, j)]);
                let p = [pts[0], pts[1], m];
                for q in &p {
                    coords.extend_from_slice(q);
                }
                let e: Vec<Vec<T>> = (1..3)
                    .map(|k| vec![p[k][0] - p[0][0], p[k][1] - p[0][1]])
                    .collect();
                metric.push(SmallSym::gram(&e));
            }
        }
    }
    let mut mesh = Mesh::new(2, 2 * n0 * n1, cells)?;
    mesh.chart = Some(Chart {
        axes: 2,
        coords,
        periods: vec![Some(periods[0]), Some(periods[1])],
    });
    Ok((mesh, MetricField::new(2, metric)?))
}

/// Inscribed regular polygon on the unit circle: the round `S^1` with its
/// chordal metric, carrying a sphere fibration with a single fiber.
pub fn build_round_circle<T: Scalar>(segments: usize) -> Result<(Mesh<T>, MetricField<T>)> {
    if segments < 3 {
        return Err(Error::MeshTooCoarse {
            axis: 0,
            resolution: segments,
        });
    }
    let mut positions = Vec::with_capacity(2 * segments);
    for k in 0..segments {
        let a = T::TAU() * T::of_usize(k) / T::of_usize(segments);
        positions.push(a.cos());
        positions.push(a.sin());
    }
    let mut cells = Vec::new();
    let mut metric = Vec::new();
    for k in 0..segments {
        let (a, b) = (k, (k + 1) % segments);
        cells.extend_from_slice(&[a, b]);
        let e = vec![vec![
            positions[2 * b] - positions[2 * a],
            positions[2 * b + 1] - positions[2 * a + 1],
        ]];
        metric.push(SmallSym::gram(&e));
    }
    let mut mesh = Mesh::new(1, segments, cells.clone())?;
    mesh.fibration = Some(SphereFibration {
        l: 1,
        fiber_cells: cells,
        positions,
        fiber_metric: metric.clone(),
        base_mass: vec![T::one()],
        base_dim: 0,
        base_stride: 0,
        fiber_stride: 1,
    });
    Ok((mesh, MetricField::new(1, metric)?))
}

/// Subdivided icosahedron projected to the unit sphere, with the induced
/// chordal metric. Vertex count `10 * 4^s + 2`.
pub fn build_icosphere<T: Scalar>(subdivisions: usize) -> Result<(Mesh<T>, MetricField<T>)> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut pos: Vec<[T; 3]> = raw
        .iter()
        .map(|p| normalize3([T::lit(p[0]), T::lit(p[1]), T::lit(p[2])]))
        .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, pos: &mut Vec<[T; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (p, q) = (pos[a], pos[b]);
                pos.push(normalize3([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                pos.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut pos);
            let bc = mid(b, c, &mut pos);
            let ca = mid(c, a, &mut pos);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    // outward orientation for the fiber, sorted ids for the mesh cells
    let mut oriented = Vec::with_capacity(faces.len() * 3);
    let mut cells = Vec::with_capacity(faces.len() * 3);
    let mut metric = Vec::with_capacity(faces.len());
    let mut fiber_metric = Vec::with_capacity(faces.len());
    for mut f in faces {
        if det3(pos[f[0]], pos[f[1]], pos[f[2]]) < T::zero() {
            f.swap(1, 2);
        }
        oriented.extend_from_slice(&f);
        fiber_metric.push(chord_gram(&pos, &f));
        let mut s = f;
        s.sort_unstable();
        cells.extend_from_slice(&s);
        metric.push(chord_gram(&pos, &s));
    }
    let mut mesh = Mesh::new(2, pos.len(), cells)?;
    mesh.fibration = Some(SphereFibration {
        l: 2,
        fiber_cells: oriented,
        positions: pos.iter().flatten().copied().collect(),
        fiber_metric,
        base_mass: vec![T::one()],
        base_dim: 0,
        base_stride: 0,
        fiber_stride: 1,
    });
    Ok((mesh, MetricField::new(2, metric)?))
}

fn normalize3<T: Scalar>(p: [T; 3]) -> [T; 3] {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / r, p[1] / r, p[2] / r]
}

fn det3<T: Scalar>(a: [T; 3], b: [T; 3], c: [T; 3]) -> T {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn chord_gram<T: Scalar>(pos: &[[T; 3]], f: &[usize; 3]) -> SmallSym<T> {
    let e: Vec<Vec<T>> = (1..3)
        .map(|k| (0..3).map(|a| pos[f[k]][a] - pos[f[0]][a]).collect())
        .collect();
    SmallSym::gram(&e)
}

/// Product `A x B` with the block-diagonal product metric. Every prism
/// `sigma x tau` is split by the staircase rule: one simplex per monotone
/// lattice path through the stored vertex orders of `sigma` and `tau`.
/// Builders store cells in an order that agrees on shared faces, which makes
/// the split conforming.
pub fn build_product<T: Scalar>(
    a: (&Mesh<T>, &MetricField<T>),
    b: (&Mesh<T>, &MetricField<T>),
) -> Result<(Mesh<T>, MetricField<T>)> {
    let (ma, ga) = a;
    let (mb, gb) = b;
    let dim = ma.dim() + mb.dim();
    if dim > 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let vb = mb.num_vertices();
    let (mut mesh, metric) = product_with(
        a,
        b,
        ma.num_vertices() * vb,
        |av, bv, _| av * vb + bv,
        [true, true],
    )?;
    mesh.fibration = match (ma.fibration(), mb.fibration()) {
        (None, Some(fb)) if fb.base_dim == 0 => Some(SphereFibration {
            base_mass: super::ops::lumped_mass(ma, ga),
            base_dim: ma.dim(),
            base_stride: vb,
            fiber_stride: 1,
            ..fb.clone()
        }),
        (Some(fa), None) if fa.base_dim == 0 => Some(SphereFibration {
            base_mass: super::ops::lumped_mass(mb, gb),
            base_dim: mb.dim(),
            base_stride: 1,
            fiber_stride: vb,
            ..fa.clone()
        }),
        _ => None,
    };
    Ok((mesh, metric))
}

/// Staircase product with a caller-supplied vertex numbering
/// `(a_vertex, b_vertex, b_cell) -> id`, which lets the mapping torus glue its
/// last layer through the monodromy. `keep_periods` says whether each factor's
/// chart axes stay periodic.
fn product_with<T: Scalar>(
    a: (&Mesh<T>, &MetricField<T>),
    b: (&Mesh<T>, &MetricField<T>),
    num_vertices: usize,
    vertex: impl Fn(usize, usize, usize) -> usize,
    keep_periods: [bool; 2],
) -> Result<(Mesh<T>, MetricField<T>)> {
    let (ma, ga) = a;
    let (mb, gb) = b;
    let (p, q) = (ma.dim(), mb.dim());
    let dim = p + q;
    let paths = staircase_paths(p, q);
    let chart_axes = ma.chart().map_or(0, |c| c.axes) + mb.chart().map_or(0, |c| c.axes);
    let mut cells = Vec::new();
    let mut metric = Vec::new();
    let mut coords = Vec::new();
    let block = |g: &SmallSym<T>, i: usize, j: usize| -> T {
        if i == 0 || j == 0 {
            T::zero()
        } else {
            g.get(i - 1, j - 1)
        }
    };
    for ca in 0..ma.num_cells() {
        let sa = ma.cell(ca);
        for cb in 0..mb.num_cells() {
            let sb = mb.cell(cb);
            for path in &paths {
                for &(i, j) in path {
                    cells.push(vertex(sa[i], sb[j], cb));
                    if chart_axes > 0 {
                        if let Some(c) = ma.chart() {
                            coords.extend_from_slice(c.lift(p, ca, i));
                        }
                        if let Some(c) = mb.chart() {
                            coords.extend_from_slice(c.lift(q, cb, j));
                        }
                    }
                }
                let mut g = SmallSym::zeros(dim);
                for k in 1..=dim {
                    for l in k..=dim {
                        let (ik, jk) = path[k];
                        let (il, jl) = path[l];
                        let v = block(ga.cell(ca), ik, il) + block(gb.cell(cb), jk, jl);
                        g.set(k - 1, l - 1, v);
                    }
                }
                metric.push(g);
            }
        }
    }
    let mut mesh = Mesh::new(dim, num_vertices, cells)?;
    if chart_axes > 0 {
        let mut periods = Vec::new();
        for (m, keep) in [(ma, keep_periods[0]), (mb, keep_periods[1])] {
            if let Some(c) = m.chart() {
                periods.extend(c.periods.iter().map(|p| if keep { *p } else { None }));
            }
        }
        mesh.chart = Some(Chart {
            axes: chart_axes,
            coords,
            periods,
        });
    }
    Ok((mesh, MetricField::new(dim, metric)?))
}

/// Monotone lattice paths from `(0,0)` to `(p,q)`, a-steps ordered first.
fn staircase_paths(p: usize, q: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(
        i: usize,
        j: usize,
        p: usize,
        q: usize,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if i == p && j == q {
            out.push(cur.clone());
            return;
        }
        if i < p {
            cur.push((i + 1, j));
            rec(i + 1, j, p, q, cur, out);
            cur.pop();
        }
        if j < q {
            cur.push((i, j + 1));
            rec(i, j + 1, p, q, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![(0, 0)];
    rec(0, 0, p, q, &mut cur, &mut out);
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(rest: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(cur.clone());
            return;
        }
        for k in 0..rest.len() {
            let x = rest.remove(k);
            cur.push(x);
            rec(rest, cur, out);
            cur.pop();
            rest.insert(k, x);
        }
    }
    let mut out = Vec::new();
    rec(&mut (0..n).collect(), &mut Vec::new(), &mut out);
    out
}

/// Mapping torus `F x [0,1] / (x,0) ~ (phi(x),1)` with metric `g_0 + dt^2`.
///
/// Vertex `(x, k)` of layer `k` has id `k * |F| + x`. The top of the last
/// layer is glued to layer 0 through `phi^{-1}`. `phi` must be a simplicial
/// automorphism of the fiber that preserves its metric.
pub fn build_mapping_torus<T: Scalar>(
    fiber: (&Mesh<T>, &MetricField<T>),
    phi: &[usize],
    circle_segments: usize,
) -> Result<(Mesh<T>, MetricField<T>)> {
    let (mf, gf) = fiber;
    if mf.dim() > 2 {
        return Err(Error::UnsupportedDimension(mf.dim() + 1));
    }
    let nv = mf.num_vertices();
    if phi.len() != nv {
        return Err(Error::InvalidGluing(format!(
            "map has {} entries for {} fiber vertices",
            phi.len(),
            nv
        )));
    }
    let mut phi_inv = vec![usize::MAX; nv];
    for (x, &y) in phi.iter().enumerate() {
        if y >= nv || phi_inv[y] != usize::MAX {
            return Err(Error::InvalidGluing(
                "map is not a vertex permutation".into(),
            ));
        }
        phi_inv[y] = x;
    }
    check_automorphism(mf, gf, phi)?;
    let (circle, gc) = build_flat_torus(&[T::one()], &[circle_segments])?;
    let last = circle_segments - 1;
    let (mesh, metric) = product_with(
        (mf, gf),
        (&circle, &gc),
        nv * circle_segments,
        |x, layer, seg| {
            if seg == last && layer == 0 {
                phi_inv[x]
            } else {
                layer * nv + x
            }
        },
        [false, true],
    )?;
    Ok((mesh, metric))
}

fn check_automorphism<T: Scalar>(mf: &Mesh<T>, gf: &MetricField<T>, phi: &[usize]) -> Result<()> {
    let n = mf.dim();
    let mut lookup: HashMap<Vec<usize>, usize> = HashMap::new();
    for (c, cell) in mf.cells().enumerate() {
        let mut key = cell.to_vec();
        key.sort_unstable();
        lookup.insert(key, c);
    }
    let tol = T::lit(1e-12);
    for (c, cell) in mf.cells().enumerate() {
        let image: Vec<usize> = cell.iter().map(|&v| phi[v]).collect();
        let mut key = image.clone();
        key.sort_unstable();
        let Some(&target) = lookup.get(&key) else {
            return Err(Error::InvalidGluing(format!(
                "cell {c} is not mapped onto a cell"
            )));
        };
        let tcell = mf.cell(target);
        // order[k]: position in the target cell of the image of local vertex k
        let order: Vec<usize> = image
            .iter()
            .map(|v| tcell.iter().position(|w| w == v).unwrap())
            .collect();
        let src = squared_lengths(gf.cell(c));
        let dst = squared_lengths(gf.cell(target));
        let mut defect = T::zero();
        let mut scale = T::one();
        for a in 0..=n {
            for b in 0..=n {
                defect = defect.max((src[a][b] - dst[order[a]][order[b]]).abs());
                scale = scale.max(src[a][b].abs());
            }
        }
        if defect > tol * scale {
            return Err(Error::MetricNotPhiInvariant {
                cell: c,
                defect: defect.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

pub fn identity_permutation(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Vertex permutation of a 2D Kuhn torus induced by the integer matrix
/// `m`, acting as `(i, j) -> (m00 i + m01 j, m10 i + m11 j)` modulo the grid.
pub fn torus_lattice_map(resolution: [usize; 2], m: [[i64; 2]; 2]) -> Vec<usize> {
    let [n0, n1] = resolution;
    let wrap = |x: i64, n: usize| x.rem_euclid(n as i64) as usize;
    let mut out = vec![0; n0 * n1];
    for j in 0..n1 {
        for i in 0..n0 {
            let (ii, jj) = (i as i64, j as i64);
            let a = wrap(m[0][0] * ii + m[0][1] * jj, n0);
            let b = wrap(m[1][0] * ii + m[1][1] * jj, n1);
            out[i + n0 * j] = a + n0 * b;
        }
    }
    out
}

/// Quarter turn `(x, y) -> (-y, x)` of the `n x n` crossed torus about the
/// corner vertex 0.
pub fn crossed_torus_quarter_turn(n: usize) -> Vec<usize> {
    let wrap = |x: i64| x.rem_euclid(n as i64) as usize;
    let mut out = vec![0; 2 * n * n];
    for j in 0..n {
        for i in 0..n {
            let jj = j as i64;
            out[i + n * j] = wrap(-jj) + n * i;
            // centre (i+1/2, j+1/2) -> (-j-1/2, i+1/2), the centre of square (-j-1, i)
            out[n * n + i + n * j] = n * n + wrap(-jj - 1) + n * i;
        }
    }
    out
}
