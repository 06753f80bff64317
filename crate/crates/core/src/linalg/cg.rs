use super::sparse::Csr;
use crate::scalar::{axpy, dot, Scalar};

/// Jacobi-preconditioned conjugate gradients for SPD systems. `x` holds the
/// initial guess on entry. Returns the number of iterations and whether the
/// relative residual target was met.
pub fn pcg<T: Scalar>(a: &Csr<T>, b: &[T], x: &mut [T], rtol: T, max_iter: usize) -> (usize, bool) {
    let n = b.len();
    let dinv: Vec<T> = a.diagonal().iter().map(|d| T::one() / *d).collect();
    let mut r = vec![T::zero(); n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let bnorm = dot(b, b).sqrt().max(T::min_positive_value());
    let mut z: Vec<T> = r.iter().zip(&dinv).map(|(ri, di)| *ri * *di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= rtol * bnorm {
            return (it, true);
        }
        a.mul_vec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (max_iter, dot(&r, &r).sqrt() <= rtol * bnorm)
}
