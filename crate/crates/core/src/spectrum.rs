//! Low spectrum of the generalized problem `K x = lambda M x` and the
//! cluster/gap test for eigenmap components.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conformal::normalize_volume;
use crate::error::{Error, Result};
use crate::linalg::cg::pcg;
use crate::linalg::dense::sym_eigen;
use crate::linalg::envelope::{reverse_cuthill_mckee, EnvelopeCholesky};
use crate::linalg::Csr;
use crate::mesh::{assemble_operators, Mesh, MetricField};
use crate::scalar::{dot, Scalar};

/// Envelope factors larger than this fall back to iterative solves.
const MAX_ENVELOPE: usize = 20_000_000;

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions<T> {
    /// Relative residual `|Kx - lambda Mx| / (|K| |x| + |lambda| |Mx|)`.
    pub tol: T,
    pub max_iter: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for EigenOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iter: 2000,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumResult<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Mass-orthonormal eigenvectors, one per value.
    pub vectors: Vec<Vec<T>>,
    pub residuals: Vec<T>,
    /// Lumped mass used for the inner product.
    pub mass: Vec<T>,
}

impl<T: Scalar> SpectrumResult<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mass_dot(&self, a: &[T], b: &[T]) -> T {
        a.iter()
            .zip(b)
            .zip(&self.mass)
            .map(|((x, y), m)| *x * *y * *m)
            .sum()
    }

    /// Largest deviation of the eigenvector Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.len() {
            for j in 0..=i {
                let target = if i == j { T::one() } else { T::zero() };
                let d = self.mass_dot(&self.vectors[i], &self.vectors[j]) - target;
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    /// Cluster id per eigenvalue, see [`cluster_ids`].
    pub fn clusters(&self, rel_tol: T) -> Vec<usize> {
        cluster_ids(&self.values, rel_tol)
    }

    /// CSV with header `index,eigenvalue,cluster_id,residual`.
    pub fn to_csv(&self, rel_tol: T) -> String {
        let ids = self.clusters(rel_tol);
        let mut out = String::from("index,eigenvalue,cluster_id,residual\n");
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{:.12e},{},{:.3e}",
                i,
                self.values[i].to_f64_lossy(),
                ids[i],
                self.residuals[i].to_f64_lossy()
            )
            .unwrap();
        }
        out
    }
}

/// Groups ascending values: a value joins the current cluster while it is
/// within `rel_tol * |first|` (plus an absolute floor of `1e-8`) of the
/// cluster's first value.
pub fn cluster_ids<T: Scalar>(values: &[T], rel_tol: T) -> Vec<usize> {
    let floor = T::lit(1e-8);
    let mut ids = Vec::with_capacity(values.len());
    let mut id = 0;
    let mut first = match values.first() {
        Some(v) => *v,
        None => return ids,
    };
    for &v in values {
        if v - first > rel_tol * first.abs() + floor {
            id += 1;
            first = v;
        }
        ids.push(id);
    }
    ids
}

/// The `count` smallest eigenpairs of the Laplace-Beltrami operator, by
/// shift-invert block subspace iteration with Rayleigh-Ritz.
pub fn laplace_spectrum<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    count: usize,
) -> Result<SpectrumResult<T>> {
    laplace_spectrum_with(mesh, metric, count, &EigenOptions::default())
}

pub fn laplace_spectrum_with<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    count: usize,
    opts: &EigenOptions<T>,
) -> Result<SpectrumResult<T>> {
    let n = mesh.num_vertices();
    if count == 0 || count >= n {
        return Err(Error::EigensolverFailure(format!(
            "requested {count} eigenpairs of a {n}-vertex mesh"
        )));
    }
    let ops = assemble_operators(mesh, metric)?;
    let k = &ops.stiffness;
    let mass = ops.mass;
    let vol = ops.cells.iter().map(|c| c.volume).sum::<T>();
    let shift = T::lit(0.1) * vol.powf(-T::lit(2.0) / T::of_usize(mesh.dim()));
    let shifted = k.add_diagonal(shift, &mass);
    let solver = ShiftedSolver::new(shifted);

    let block = (2 * count).max(count + 10).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut y: Vec<Vec<T>> = (0..block)
        .map(|_| (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect())
        .collect();
    m_orthonormalize(&mut y, &mass, &mut rng);
    let knorm = k.norm_inf();
    let mut values = vec![T::zero(); block];
    let mut residuals = vec![T::infinity(); block];
    for _ in 0..opts.max_iter {
        let mut z: Vec<Vec<T>> = y
            .iter()
            .map(|v| {
                let rhs: Vec<T> = v.iter().zip(&mass).map(|(a, m)| *a * *m).collect();
                solver.solve(&rhs)
            })
            .collect::<Result<_>>()?;
        m_orthonormalize(&mut z, &mass, &mut rng);
        let kz: Vec<Vec<T>> = z.iter().map(|v| k.apply(v)).collect();
        let mut small = vec![T::zero(); block * block];
        for i in 0..block {
            for j in 0..=i {
                let v = (dot(&z[i], &kz[j]) + dot(&z[j], &kz[i])) / T::lit(2.0);
                small[i * block + j] = v;
                small[j * block + i] = v;
            }
        }
        let (theta, s) = sym_eigen(&small, block);
        let rotate = |src: &[Vec<T>]| -> Vec<Vec<T>> {
            (0..block)
                .map(|c| {
                    let mut out = vec![T::zero(); n];
                    for (r, v) in src.iter().enumerate() {
                        let w = s[r * block + c];
                        for (o, x) in out.iter_mut().zip(v) {
                            *o += w * *x;
                        }
                    }
                    out
                })
                .collect()
        };
        y = rotate(&z);
        let ky = rotate(&kz);
        for i in 0..count {
            let lam = theta[i];
            let mut rr = T::zero();
            let mut mx = T::zero();
            for v in 0..n {
                let mxv = mass[v] * y[i][v];
                rr += (ky[i][v] - lam * mxv).powi(2);
                mx += mxv * mxv;
            }
            let xnorm = dot(&y[i], &y[i]).sqrt();
            residuals[i] = rr.sqrt() / (knorm * xnorm + lam.abs() * mx.sqrt());
        }
        values = theta;
        if residuals[..count].iter().all(|r| *r <= opts.tol) {
            y.truncate(count);
            values.truncate(count);
            residuals.truncate(count);
            return Ok(SpectrumResult {
                values,
                vectors: y,
                residuals,
                mass,
            });
        }
    }
    let worst = residuals[..count].iter().copied().fold(T::zero(), T::max);
    Err(Error::EigensolverFailure(format!(
        "no convergence after {} iterations (residual {:.3e}, lambda_{} ~ {:.6e})",
        opts.max_iter,
        worst.to_f64_lossy(),
        count - 1,
        values[count - 1].to_f64_lossy()
    )))
}

enum ShiftedSolver<T> {
    Direct(EnvelopeCholesky<T>),
    Iterative(Csr<T>),
}

impl<T: Scalar> ShiftedSolver<T> {
    fn new(a: Csr<T>) -> Self {
        let perm = reverse_cuthill_mckee(&a);
        if EnvelopeCholesky::envelope_size(&a, &perm) <= MAX_ENVELOPE {
            if let Some(f) = EnvelopeCholesky::factor(&a, perm) {
                return Self::Direct(f);
            }
        }
        Self::Iterative(a)
    }

    fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        match self {
            Self::Direct(f) => Ok(f.solve(b)),
            Self::Iterative(a) => {
                let mut x = vec![T::zero(); b.len()];
                let rtol = T::lit(1e-13).max(T::lit(16.0) * T::eps());
                let (_, ok) = pcg(a, b, &mut x, rtol, 20 * b.len());
                if ok {
                    Ok(x)
                } else {
                    Err(Error::EigensolverFailure(
                        "inner conjugate-gradient solve stalled".into(),
                    ))
                }
            }
        }
    }
}

/// Modified Gram-Schmidt in the mass inner product, applied twice.
/// Vectors that collapse are replaced by fresh random ones.
fn m_orthonormalize<T: Scalar>(vs: &mut [Vec<T>], mass: &[T], rng: &mut ChaCha8Rng) {
    let mdot = |a: &[T], b: &[T]| -> T {
        a.iter()
            .zip(b)
            .zip(mass)
            .map(|((x, y), m)| *x * *y * *m)
            .sum()
    };
    for i in 0..vs.len() {
        for _attempt in 0..10 {
            let before = mdot(&vs[i], &vs[i]).sqrt();
            let (head, tail) = vs.split_at_mut(i);
            let v = &mut tail[0];
            for _ in 0..2 {
                for u in head.iter() {
                    let c = mdot(v, u);
                    for (x, y) in v.iter_mut().zip(u) {
                        *x -= c * *y;
                    }
                }
            }
            let after = mdot(v, v).sqrt();
            if after > T::lit(1e-10) * before && after > T::zero() {
                v.iter_mut().for_each(|x| *x /= after);
                break;
            }
            for x in v.iter_mut() {
                *x = T::lit(rng.gen_range(-1.0..1.0));
            }
        }
    }
}

/// Outcome of the cluster/gap test for a candidate eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct GapReport<T> {
    /// Index of the first eigenvalue of the located cluster.
    pub k: usize,
    pub multiplicity: usize,
    /// Mean eigenvalue of the cluster.
    pub eigenvalue: T,
    /// `(max - min) / min` over the cluster.
    pub cluster_width: T,
    /// `lambda_k - lambda_{k-1}`; `None` for the bottom cluster.
    pub gap_below: Option<T>,
    /// First eigenvalue above the cluster minus its largest member; `None`
    /// when the computed spectrum ends inside the cluster.
    pub gap_above: Option<T>,
    /// Mass-norm relative residual of the components after projection onto
    /// the cluster eigenspace.
    pub match_residual: T,
}

impl<T: Scalar> GapReport<T> {
    pub const CSV_HEADER: &'static str = "k,cluster_width,gap_below,gap_above,match_residual";

    /// One CSV row; missing gaps are written as `nan`.
    pub fn csv_row(&self) -> String {
        let opt = |g: Option<T>| g.map_or(f64::NAN, |v| v.to_f64_lossy());
        format!(
            "{},{:.6e},{:.6e},{:.6e},{:.6e}",
            self.k,
            self.cluster_width.to_f64_lossy(),
            opt(self.gap_below),
            opt(self.gap_above),
            self.match_residual.to_f64_lossy()
        )
    }

    /// Strict gap on at least one side of the cluster.
    pub fn has_strict_gap(&self) -> bool {
        self.gap_below.is_some_and(|g| g > T::zero())
            || self.gap_above.is_some_and(|g| g > T::zero())
    }
}

/// Locates the cluster nearest to `candidate` and measures how well the map
/// `components` (vertex functions) lie in its eigenspace.
pub fn extremality_gap_check<T: Scalar>(
    spectrum: &SpectrumResult<T>,
    components: &[Vec<T>],
    candidate: T,
    cluster_tol: T,
) -> Result<GapReport<T>> {
    let largest = *spectrum
        .values
        .last()
        .ok_or_else(|| Error::EigensolverFailure("empty spectrum".into()))?;
    if candidate > largest * (T::one() + cluster_tol) {
        return Err(Error::SpectrumTooShallow {
            candidate: candidate.to_f64_lossy(),
            largest: largest.to_f64_lossy(),
        });
    }
    let ids = spectrum.clusters(cluster_tol);
    let num = ids.last().map_or(0, |i| i + 1);
    let range = |id: usize| {
        let lo = ids.iter().position(|&i| i == id).unwrap();
        let hi = ids.iter().rposition(|&i| i == id).unwrap();
        (lo, hi)
    };
    let distance = |id: usize| {
        let (lo, hi) = range(id);
        let (a, b) = (spectrum.values[lo], spectrum.values[hi]);
        if candidate < a {
            a - candidate
        } else if candidate > b {
            candidate - b
        } else {
            T::zero()
        }
    };
    let best = (0..num)
        .min_by(|&a, &b| distance(a).partial_cmp(&distance(b)).unwrap())
        .unwrap();
    let (lo, hi) = range(best);
    let vals = &spectrum.values;
    let gap_below = (lo > 0).then(|| vals[lo] - vals[lo - 1]);
    let gap_above = (hi + 1 < vals.len()).then(|| vals[hi + 1] - vals[hi]);
    let mean = vals[lo..=hi].iter().copied().sum::<T>() / T::of_usize(hi - lo + 1);
    let width = if vals[lo] > T::zero() {
        (vals[hi] - vals[lo]) / vals[lo]
    } else {
        vals[hi] - vals[lo]
    };
    let mut num_sq = T::zero();
    let mut den_sq = T::zero();
    for u in components {
        let mut rem = u.clone();
        for x in &spectrum.vectors[lo..=hi] {
            let c = spectrum.mass_dot(x, u);
            for (r, xi) in rem.iter_mut().zip(x) {
                *r -= c * *xi;
            }
        }
        num_sq += spectrum.mass_dot(&rem, &rem);
        den_sq += spectrum.mass_dot(u, u);
    }
    let match_residual = if den_sq > T::zero() {
        (num_sq / den_sq).sqrt()
    } else {
        T::one()
    };
    Ok(GapReport {
        k: lo,
        multiplicity: hi - lo + 1,
        eigenvalue: mean,
        cluster_width: width,
        gap_below,
        gap_above,
        match_residual,
    })
}

/// `lambda_k` of the unit-volume representative of `metric`.
pub fn eigenvalue_functional<T: Scalar>(
    mesh: &Mesh<T>,
    metric: &MetricField<T>,
    k: usize,
) -> Result<T> {
    let (normalized, _) = normalize_volume(mesh, metric)?;
    let spec = laplace_spectrum(mesh, &normalized, k + 1)?;
    Ok(spec.values[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clustering_by_relative_width() {
        let v = [0.0, 1e-12, 1.0, 1.01, 1.015, 1.5, 2.0, 2.05];
        assert_eq!(cluster_ids(&v, 0.02), vec![0, 0, 1, 1, 1, 2, 3, 4]);
        assert_eq!(cluster_ids::<f64>(&[], 0.02), Vec::<usize>::new());
    }
}
