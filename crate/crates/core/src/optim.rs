//! Preconditioned limited-memory BFGS with a backtracking line search.

use std::collections::VecDeque;

use crate::scalar::{axpy, dot, Scalar};

#[derive(Clone, Copy, Debug)]
pub struct LbfgsOptions<T> {
    pub memory: usize,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the Armijo test.
    pub c1: T,
    pub max_halvings: usize,
}

impl<T: Scalar> Default for LbfgsOptions<T> {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 5000,
            c1: T::lit(1e-4),
            max_halvings: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// No step along the search direction decreased the objective, even
    /// after a restart from the preconditioned gradient.
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct LbfgsOutcome<T> {
    pub x: Vec<T>,
    pub value: T,
    pub grad: Vec<T>,
    pub iterations: usize,
    pub termination: Termination,
}

struct Pair<T> {
    s: Vec<T>,
    y: Vec<T>,
    rho: T,
}

/// Minimizes `eval` (returning value and gradient) starting at `x0`.
///
/// `precond` is a positive diagonal approximation of the inverse Hessian.
/// `done(value, grad)` decides convergence and is checked before every step.
pub fn lbfgs<T, F, D>(
    x0: Vec<T>,
    precond: &[T],
    mut eval: F,
    mut done: D,
    opts: &LbfgsOptions<T>,
) -> LbfgsOutcome<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> (T, Vec<T>),
    D: FnMut(T, &[T]) -> bool,
{
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = eval(&x);
    let mut hist: VecDeque<Pair<T>> = VecDeque::with_capacity(opts.memory);
    let mut iter = 0;
    let mut gamma = T::one();
    loop {
        if done(f, &g) {
            return outcome(x, f, g, iter, Termination::Converged);
        }
        if iter >= opts.max_iter {
            return outcome(x, f, g, iter, Termination::MaxIterations);
        }
        let mut restarted = false;
        let step = loop {
            let mut d = direction(&g, precond, &hist, gamma);
            let mut gd = dot(&g, &d);
            if !(gd < T::zero()) {
                hist.clear();
                d = g.iter().zip(precond).map(|(gi, pi)| -*gi * *pi).collect();
                gd = dot(&g, &d);
            }
            let alpha0 = if hist.is_empty() {
                let dmax = crate::scalar::sup_norm(&d);
                T::one().min(T::one() / dmax.max(T::min_positive_value()))
            } else {
                T::one()
            };
            match line_search(&x, f, gd, &d, alpha0, &mut eval, opts) {
                Some(s) => break Some(s),
                None if !restarted && !hist.is_empty() => {
                    hist.clear();
                    gamma = T::one();
                    restarted = true;
                }
                None => break None,
            }
        };
        let Some((alpha, d, f_new, g_new)) = step else {
            return outcome(x, f, g, iter, Termination::LineSearchFailed);
        };
        let mut s = d;
        s.iter_mut().for_each(|v| *v *= alpha);
        let y: Vec<T> = g_new.iter().zip(&g).map(|(a, b)| *a - *b).collect();
        axpy(T::one(), &s, &mut x);
        let sy = dot(&s, &y);
        let yy: T = y.iter().zip(precond).map(|(yi, pi)| *yi * *yi * *pi).sum();
        if sy > T::eps() * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && yy > T::zero() {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            gamma = sy / yy;
            hist.push_back(Pair {
                s,
                y,
                rho: T::one() / sy,
            });
        }
        f = f_new;
        g = g_new;
        iter += 1;
        debug_assert_eq!(x.len(), n);
    }
}

fn outcome<T>(
    x: Vec<T>,
    value: T,
    grad: Vec<T>,
    iterations: usize,
    t: Termination,
) -> LbfgsOutcome<T> {
    LbfgsOutcome {
        x,
        value,
        grad,
        iterations,
        termination: t,
    }
}

/// Two-loop recursion with initial matrix `gamma * diag(precond)`.
fn direction<T: Scalar>(g: &[T], precond: &[T], hist: &VecDeque<Pair<T>>, gamma: T) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for p in hist.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        axpy(-a, &p.y, &mut q);
        alphas.push(a);
    }
    for (qi, pi) in q.iter_mut().zip(precond) {
        *qi *= gamma * *pi;
    }
    for (p, a) in hist.iter().zip(alphas.iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        axpy(*a - b, &p.s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

type Step<T> = (T, Vec<T>, T, Vec<T>);

/// Halving search. A trial is accepted on Armijo decrease, or on the
/// approximate Wolfe test once values differ only at roundoff level.
fn line_search<T, F>(
    x: &[T],
    f: T,
    gd: T,
    d: &[T],
    alpha0: T,
    eval: &mut F,
    opts: &LbfgsOptions<T>,
) -> Option<Step<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    let two = T::lit(2.0);
    let noise = T::lit(1e-10) * (T::one() + f.abs());
    let mut alpha = alpha0;
    let mut trial = x.to_vec();
    for _ in 0..=opts.max_halvings {
        trial.copy_from_slice(x);
        axpy(alpha, d, &mut trial);
        let (ft, gt) = eval(&trial);
        if ft.is_finite() {
            let armijo = ft <= f + opts.c1 * alpha * gd;
            let gdt = dot(&gt, d);
            let wolfe = ft <= f + noise
                && gdt <= (T::one() - two * opts.c1) * gd.abs()
                && gdt >= T::lit(0.9) * gd;
            if armijo || wolfe {
                return Some((alpha, d.to_vec(), ft, gt));
            }
        }
        alpha /= two;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let eval = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (f, g)
        };
        let out = lbfgs(
            vec![-1.2, 1.0],
            &[1.0, 1.0],
            eval,
            |_, g| g.iter().all(|v| v.abs() < 1e-10),
            &LbfgsOptions::default(),
        );
        assert_eq!(out.termination, Termination::Converged);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn badly_scaled_quadratic_with_preconditioner() {
        let scales = [1.0, 1e4, 1e-3, 50.0];
        let eval = |x: &[f64]| {
            let f = x
                .iter()
                .zip(&scales)
                .map(|(v, s)| 0.5 * s * (v - 1.0).powi(2))
                .sum();
            let g = x.iter().zip(&scales).map(|(v, s)| s * (v - 1.0)).collect();
            (f, g)
        };
        let pre: Vec<f64> = scales.iter().map(|s| 1.0 / s).collect();
        let out = lbfgs(
            vec![0.0; 4],
            &pre,
            eval,
            |_, g| g.iter().zip(&pre).all(|(v, p)| (v * p).abs() < 1e-12),
            &LbfgsOptions::default(),
        );
        assert_eq!(out.termination, Termination::Converged);
        assert!(out.iterations <= 3);
    }
}
