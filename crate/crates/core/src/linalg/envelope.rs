//! Envelope (profile) Cholesky factorisation under a reverse Cuthill-McKee
//! ordering. Used for the shift-invert solves of the eigensolver.

use std::collections::VecDeque;

use super::sparse::Csr;
use crate::scalar::Scalar;

/// Reverse Cuthill-McKee permutation of a structurally symmetric matrix.
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee<T: Scalar>(a: &Csr<T>) -> Vec<usize> {
    let n = a.nrows;
    let degree: Vec<usize> = (0..n).map(|r| a.row_ptr[r + 1] - a.row_ptr[r]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // start each component from a minimum-degree unvisited vertex,
        // refined to a pseudo-peripheral one by repeated BFS
        let mut start = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
            .unwrap();
        let mut depth = 0;
        for _ in 0..4 {
            let (levels, last) = bfs_levels(a, start, &visited);
            if levels <= depth {
                break;
            }
            depth = levels;
            start = last;
        }
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a.row(v).map(|(c, _)| c).filter(|&c| !visited[c]).collect();
            nbrs.sort_by_key(|&c| (degree[c], c));
            for c in nbrs {
                if !visited[c] {
                    visited[c] = true;
                    queue.push_back(c);
                }
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels<T: Scalar>(a: &Csr<T>, start: usize, blocked: &[bool]) -> (usize, usize) {
    let n = a.nrows;
    let mut level = vec![usize::MAX; n];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut last = start;
    while let Some(v) = queue.pop_front() {
        last = v;
        for (c, _) in a.row(v) {
            if !blocked[c] && level[c] == usize::MAX {
                level[c] = level[v] + 1;
                queue.push_back(c);
            }
        }
    }
    (level[last], last)
}

/// Lower-triangular envelope factor `P A P^T = L L^T`.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky<T> {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> EnvelopeCholesky<T> {
    /// Number of stored entries the factor of `a` would need.
    pub fn envelope_size(a: &Csr<T>, perm: &[usize]) -> usize {
        let (first, _) = Self::profile(a, perm);
        first.iter().enumerate().map(|(i, f)| i - f + 1).sum()
    }

    fn profile(a: &Csr<T>, perm: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let n = a.nrows;
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let first = (0..n)
            .map(|i| {
                a.row(perm[i])
                    .map(|(c, _)| inv[c])
                    .filter(|&j| j <= i)
                    .min()
                    .unwrap_or(i)
            })
            .collect();
        (first, inv)
    }

    /// Factorises a symmetric positive definite matrix. Returns `None` when a
    /// pivot is nonpositive or lost to cancellation.
    pub fn factor(a: &Csr<T>, perm: Vec<usize>) -> Option<Self> {
        let n = a.nrows;
        let (first, inv) = Self::profile(a, &perm);
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut data = vec![T::zero(); start[n]];
        for i in 0..n {
            for (c, v) in a.row(perm[i]) {
                let j = inv[c];
                if j <= i {
                    data[start[i] + (j - first[i])] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = data[start[i] + (j - fi)];
                let ri = &data[start[i] + (k0 - fi)..start[i] + (j - fi)];
                let rj = &data[start[j] + (k0 - fj)..start[j] + (j - fj)];
                for (x, y) in ri.iter().zip(rj) {
                    s -= *x * *y;
                }
                let ljj = data[start[j] + (j - fj)];
                data[start[i] + (j - fi)] = s / ljj;
            }
            let row = &data[start[i]..start[i] + (i - fi)];
            let aii = data[start[i] + (i - fi)];
            let s = aii - row.iter().map(|x| *x * *x).sum::<T>();
            // pivots at roundoff level of the diagonal mean a singular matrix
            if !(s > T::lit(64.0) * T::eps() * aii.abs()) {
                return None;
            }
            data[start[i] + (i - fi)] = s.sqrt();
        }
        Some(Self {
            n,
            perm,
            first,
            start,
            data,
        })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y: Vec<T> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i] + (i - fi)];
            let mut s = y[i];
            for (l, yk) in row.iter().zip(&y[fi..i]) {
                s -= *l * *yk;
            }
            y[i] = s / self.data[self.start[i] + (i - fi)];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i] / self.data[self.start[i] + (i - fi)];
            y[i] = xi;
            let row = &self.data[self.start[i]..self.start[i] + (i - fi)];
            for (l, yk) in row.iter().zip(&mut y[fi..i]) {
                *yk -= *l * xi;
            }
        }
        let mut x = vec![T::zero(); n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring_laplacian(n: usize, shift: f64) -> Csr<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            t.push((i, i, 2.0 + shift));
            t.push((i, j, -1.0));
            t.push((j, i, -1.0));
        }
        Csr::from_triplets(n, n, &t)
    }

    #[test]
    fn solves_periodic_system() {
        let a = ring_laplacian(17, 0.3);
        let perm = reverse_cuthill_mckee(&a);
        let mut sorted = perm.clone();
        sorted.sort();
        assert_eq!(sorted, (0..17).collect::<Vec<_>>());
        let f = EnvelopeCholesky::factor(&a, perm).unwrap();
        let b: Vec<f64> = (0..17).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b);
        let r = a.apply(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = ring_laplacian(6, 0.0);
        let perm = reverse_cuthill_mckee(&a);
        // the pure ring Laplacian is only semidefinite
        assert!(EnvelopeCholesky::factor(&a, perm).is_none());
    }
}
