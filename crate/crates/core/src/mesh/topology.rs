use std::collections::VecDeque;

use super::Mesh;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A generating loop of first homology detected from the periodic chart:
/// a closed vertex walk (first vertex repeated at the end) winding once
/// around chart axis `axis` and zero times around every other periodic axis.
#[derive(Clone, Debug)]
pub struct Generator<T> {
    pub axis: usize,
    pub period: T,
    pub cycle: Vec<usize>,
}

impl<T: Scalar> Mesh<T> {
    /// Chart displacement of every edge in its stored orientation `(a, b)`,
    /// `a < b`; row-major with one row of `axes` entries per edge.
    pub fn edge_displacements(&self) -> Option<Vec<T>> {
        let chart = self.chart.as_ref()?;
        let axes = chart.axes;
        let mut out = vec![T::zero(); self.num_edges() * axes];
        let mut seen = vec![false; self.num_edges()];
        for c in 0..self.num_cells() {
            let cell = self.cell(c);
            for i in 0..=self.dim {
                for j in 0..=self.dim {
                    if cell[i] >= cell[j] {
                        continue;
                    }
                    let e = self.edge_index(cell[i], cell[j]).unwrap();
                    if seen[e] {
                        continue;
                    }
                    seen[e] = true;
                    let (li, lj) = (chart.lift(self.dim, c, i), chart.lift(self.dim, c, j));
                    for a in 0..axes {
                        out[e * axes + a] = lj[a] - li[a];
                    }
                }
            }
        }
        Some(out)
    }

    /// One generating loop per periodic chart axis, found as fundamental
    /// cycles of a breadth-first spanning tree.
    pub fn generators(&self) -> Result<Vec<Generator<T>>> {
        let chart = self
            .chart
            .as_ref()
            .ok_or_else(|| Error::UnsupportedTopology("mesh has no periodic chart".into()))?;
        let axes = chart.axes;
        let periodic: Vec<(usize, T)> = chart
            .periods
            .iter()
            .enumerate()
            .filter_map(|(a, p)| p.map(|p| (a, p)))
            .collect();
        if periodic.is_empty() {
            return Err(Error::UnsupportedTopology(
                "no periodic directions detected".into(),
            ));
        }
        let disp = self.edge_displacements().unwrap();
        let adj = self.neighbors();
        let nv = self.num_vertices;
        let mut parent = vec![usize::MAX; nv];
        let mut lifted = vec![T::zero(); nv * axes];
        let mut tree_edge = vec![false; self.num_edges()];
        parent[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    let e = self.edge_index(u, v).unwrap();
                    tree_edge[e] = true;
                    let sign = if u < v { T::one() } else { -T::one() };
                    for a in 0..axes {
                        lifted[v * axes + a] = lifted[u * axes + a] + sign * disp[e * axes + a];
                    }
                    queue.push_back(v);
                }
            }
        }
        let path_to_root = |mut v: usize| {
            let mut p = vec![v];
            while v != 0 {
                v = parent[v];
                p.push(v);
            }
            p.reverse();
            p
        };
        let mut found: Vec<Option<Generator<T>>> = vec![None; periodic.len()];
        for (e, [u, v]) in self.edges().iter().enumerate() {
            if tree_edge[e] {
                continue;
            }
            let winding: Vec<i64> = periodic
                .iter()
                .map(|&(a, p)| {
                    let gap = lifted[*u * axes + a] + disp[e * axes + a] - lifted[*v * axes + a];
                    (gap / p).round().to_i64().unwrap_or(i64::MAX)
                })
                .collect();
            let nonzero: Vec<usize> = (0..winding.len()).filter(|&k| winding[k] != 0).collect();
            if nonzero.len() != 1 || winding[nonzero[0]].abs() != 1 {
                continue;
            }
            let k = nonzero[0];
            if found[k].is_some() {
                continue;
            }
            let (pu, pv) = (path_to_root(*u), path_to_root(*v));
            let common = pu.iter().zip(&pv).take_while(|(a, b)| a == b).count();
            let mut cycle: Vec<usize> = pu[common - 1..].to_vec();
            cycle.extend(pv[common - 1..].iter().rev());
            if winding[k] < 0 {
                cycle.reverse();
            }
            found[k] = Some(Generator {
                axis: periodic[k].0,
                period: periodic[k].1,
                cycle,
            });
            if found.iter().all(Option::is_some) {
                break;
            }
        }
        found
            .into_iter()
            .map(|g| {
                g.ok_or_else(|| {
                    Error::UnsupportedTopology("could not isolate a generating loop".into())
                })
            })
            .collect()
    }
}
