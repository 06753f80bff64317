//! Small dense kernels: cyclic Jacobi eigensolver for symmetric matrices.

use crate::scalar::Scalar;

/// Eigen-decomposition of a symmetric row-major `n x n` matrix by cyclic
/// Jacobi rotations. Returns ascending eigenvalues and the matching
/// eigenvectors as columns of a row-major matrix.
pub fn sym_eigen<T: Scalar>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    assert_eq!(a.len(), n * n);
    let mut a = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += a[i * n + i] * a[i * n + i];
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off <= T::eps() * T::eps() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let vals = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![T::zero(); n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + new] = v[k * n + old];
        }
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_reconstructs_matrix() {
        let n = 4;
        let a: [f64; 16] = [
            4.0, 1.0, -2.0, 0.5, //
            1.0, 3.0, 0.0, 1.0, //
            -2.0, 0.0, 5.0, 2.0, //
            0.5, 1.0, 2.0, -1.0,
        ];
        let (vals, vecs) = sym_eigen(&a, n);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += vecs[i * n + k] * vals[k] * vecs[j * n + k];
                }
                assert!((s - a[i * n + j]).abs() < 1e-12);
            }
        }
        // trace
        let tr: f64 = vals.iter().sum();
        assert!((tr - 11.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_input_is_sorted() {
        let (vals, _) = sym_eigen(&[3.0, 0.0, 0.0, 1.0], 2);
        assert_eq!(vals, vec![1.0, 3.0]);
    }
}
