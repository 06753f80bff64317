use crate::scalar::Scalar;

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct Csr<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    /// Assembles from `(row, col, value)` triplets. Duplicates are summed in
    /// input order, so the result is bitwise reproducible for a fixed input.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, stable
        let mut slots = counts.clone();
        let mut bucket = vec![(0usize, T::zero()); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[slots[r]] = (c, v);
            slots[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..nrows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut acc = T::zero();
                while i < row.len() && row[i].0 == c {
                    acc += row[i].1;
                    i += 1;
                }
                col_idx.push(c);
                values.push(acc);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        for r in 0..self.nrows {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows).map(|r| self.get(r, r)).collect()
    }

    /// Largest absolute row sum (infinity norm).
    pub fn norm_inf(&self) -> T {
        (0..self.nrows)
            .map(|r| self.row(r).fold(T::zero(), |s, (_, v)| s + v.abs()))
            .fold(T::zero(), T::max)
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                trip.push((c, r, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &trip)
    }

    /// Frobenius norm of `A - A^T`.
    pub fn asymmetry(&self) -> T {
        let mut s = T::zero();
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let d = v - self.get(c, r);
                s += d * d;
            }
        }
        s.sqrt()
    }

    /// `A + alpha * diag(d)`
    pub fn add_diagonal(&self, alpha: T, d: &[T]) -> Self {
        let mut trip = Vec::with_capacity(self.nnz() + self.nrows);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                trip.push((r, c, v));
            }
            trip.push((r, r, alpha * d[r]));
        }
        Self::from_triplets(self.nrows, self.ncols, &trip)
    }
}
