use crate::scalar::Scalar;

/// Symmetric matrix of size at most 3x3, used for per-cell metric tensors
/// expressed in the edge basis of a simplex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallSym<T> {
    dim: usize,
    m: [[T; 3]; 3],
}

impl<T: Scalar> SmallSym<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension {dim} out of range");
        Self {
            dim,
            m: [[T::zero(); 3]; 3],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            s.m[i][i] = T::one();
        }
        s
    }

    /// Gram matrix of the given vectors (`vectors[i]` is the i-th basis vector).
    pub fn gram(vectors: &[Vec<T>]) -> Self {
        let dim = vectors.len();
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = crate::scalar::dot(&vectors[i], &vectors[j]);
                s.set(i, j, v);
            }
        }
        s
    }

    /// Builds from the row-major upper triangle `a00 a01 .. a0n a11 ..`.
    pub fn from_upper(dim: usize, upper: &[T]) -> Self {
        assert_eq!(upper.len(), dim * (dim + 1) / 2);
        let mut s = Self::zeros(dim);
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                s.set(i, j, upper[k]);
                k += 1;
            }
        }
        s
    }

    pub fn upper(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.dim * (self.dim + 1) / 2);
        for i in 0..self.dim {
            for j in i..self.dim {
                out.push(self.m[i][j]);
            }
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[i][j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.m[i][j] = v;
        self.m[j][i] = v;
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut s = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s.m[i][j] = self.m[i][j] * c;
            }
        }
        s
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut s = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s.m[i][j] += other.m[i][j];
            }
        }
        s
    }

    pub fn det(&self) -> T {
        let m = &self.m;
        match self.dim {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    /// Inverse via the adjugate. Caller guarantees nonsingularity.
    pub fn inverse(&self) -> Self {
        let m = &self.m;
        let d = self.det();
        let mut s = Self::zeros(self.dim);
        match self.dim {
            1 => s.m[0][0] = T::one() / d,
            2 => {
                s.m[0][0] = m[1][1] / d;
                s.m[1][1] = m[0][0] / d;
                s.set(0, 1, -m[0][1] / d);
            }
            _ => {
                s.m[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
                s.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
                s.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
                s.set(0, 1, -(m[1][0] * m[2][2] - m[1][2] * m[2][0]) / d);
                s.set(0, 2, (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d);
                s.set(1, 2, -(m[0][0] * m[2][1] - m[0][1] * m[2][0]) / d);
            }
        }
        s
    }

    /// `a^T M b`
    #[inline]
    pub fn bilinear(&self, a: &[T], b: &[T]) -> T {
        let mut acc = T::zero();
        for i in 0..self.dim {
            let mut row = T::zero();
            for j in 0..self.dim {
                row += self.m[i][j] * b[j];
            }
            acc += a[i] * row;
        }
        acc
    }

    /// `M a`
    #[inline]
    pub fn apply(&self, a: &[T], out: &mut [T]) {
        for i in 0..self.dim {
            let mut row = T::zero();
            for j in 0..self.dim {
                row += self.m[i][j] * a[j];
            }
            out[i] = row;
        }
    }

    /// Smallest eigenvalue, from the symmetric Jacobi solver.
    pub fn min_eigenvalue(&self) -> T {
        let n = self.dim;
        let mut a = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = self.m[i][j];
            }
        }
        let (vals, _) = super::dense::sym_eigen(&a, n);
        vals[0]
    }

    /// Positive definiteness via leading principal minors.
    pub fn is_spd(&self) -> bool {
        let m = &self.m;
        let d1 = m[0][0];
        if !(d1 > T::zero()) {
            return false;
        }
        if self.dim >= 2 {
            let d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if !(d2 > T::zero()) {
                return false;
            }
        }
        if self.dim == 3 && !(self.det() > T::zero()) {
            return false;
        }
        self.m.iter().flatten().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut d = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                d = d.max((self.m[i][j] - other.m[i][j]).abs());
            }
        }
        d
    }
}
