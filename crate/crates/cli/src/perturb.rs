//! Smooth metric perturbations built from seeded trigonometric sums.
//!
//! Fields are evaluated at cell barycentres of the periodic chart and only
//! oscillate along periodic axes, so they are well defined on the closed
//! manifold. Each field is scaled so that its discrete sup-norm is one.

use std::f64::consts::PI;

use eigenmap_core::linalg::SmallSym;
use eigenmap_core::mesh::{conformal_scale, Chart, MetricField};
use eigenmap_core::{Error, Mesh64, MetricField64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PerturbationMode;

/// `sum_k a_k cos(2 pi k.x / P) + b_k sin(2 pi k.x / P)` over a box of
/// wave vectors with a decaying amplitude envelope.
#[derive(Clone, Debug)]
pub struct TrigField {
    terms: Vec<(Vec<f64>, f64, f64)>,
}

impl TrigField {
    pub fn random(periods: &[Option<f64>], frequency: usize, rng: &mut ChaCha8Rng) -> Self {
        let f = frequency as i64;
        let mut ks: Vec<Vec<i64>> = vec![vec![]];
        for p in periods {
            let range = if p.is_some() { -f..=f } else { 0..=0 };
            ks = ks
                .into_iter()
                .flat_map(|k| {
                    range.clone().map(move |j| {
                        let mut k = k.clone();
                        k.push(j);
                        k
                    })
                })
                .collect();
        }
        let terms = ks
            .into_iter()
            .filter(|k| k.iter().any(|&j| j != 0))
            .map(|k| {
                let norm2 = k.iter().map(|j| (j * j) as f64).sum::<f64>();
                let env = 1.0 / (1.0 + norm2);
                let wave = k
                    .iter()
                    .zip(periods)
                    .map(|(&j, p)| p.map_or(0.0, |p| 2.0 * PI * j as f64 / p))
                    .collect();
                (
                    wave,
                    env * rng.gen_range(-1.0..1.0),
                    env * rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(w, a, b)| {
                let t: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
                a * t.cos() + b * t.sin()
            })
            .sum()
    }
}

fn chart_required(mesh: &Mesh64) -> Result<&Chart<f64>, Error> {
    let chart = mesh
        .chart()
        .ok_or_else(|| Error::UnsupportedTopology("perturbations need a periodic chart".into()))?;
    if chart.periods().iter().all(|p| p.is_none()) {
        return Err(Error::UnsupportedTopology(
            "perturbations need at least one periodic axis".into(),
        ));
    }
    Ok(chart)
}

pub fn barycentres(mesh: &Mesh64) -> Result<Vec<Vec<f64>>, Error> {
    let chart = chart_required(mesh)?;
    let n = mesh.dim();
    Ok((0..mesh.num_cells())
        .map(|c| {
            let mut x = vec![0.0; chart.axes()];
            for k in 0..=n {
                for (xa, pa) in x.iter_mut().zip(chart.lift(n, c, k)) {
                    *xa += pa / (n + 1) as f64;
                }
            }
            x
        })
        .collect())
}

fn normalized(values: Vec<f64>) -> Vec<f64> {
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup > 0.0 {
        values.into_iter().map(|v| v / sup).collect()
    } else {
        values
    }
}

/// Unit sup-norm scalar field at cell barycentres.
pub fn scalar_field(mesh: &Mesh64, frequency: usize, seed: u64) -> Result<Vec<f64>, Error> {
    let chart = chart_required(mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = TrigField::random(chart.periods(), frequency, &mut rng);
    Ok(normalized(
        barycentres(mesh)?.iter().map(|x| field.eval(x)).collect(),
    ))
}

/// `e^{eps f} g` with `f` a unit sup-norm trigonometric field.
pub fn conformal_perturbation(
    mesh: &Mesh64,
    metric: &MetricField64,
    eps: f64,
    frequency: usize,
    seed: u64,
) -> Result<MetricField64, Error> {
    let f = scalar_field(mesh, frequency, seed)?;
    let factors: Vec<f64> = f.iter().map(|v| (eps * v).exp()).collect();
    conformal_scale(metric, &factors)
}

/// `g + eps h` where `h` is a symmetric tensor field in chart coordinates
/// whose pointwise operator norm has sup one. On a flat chart this is
/// `G' = E^T (I + eps H) E` with `E` the cell edge vectors.
pub fn general_perturbation(
    mesh: &Mesh64,
    metric: &MetricField64,
    eps: f64,
    frequency: usize,
    seed: u64,
) -> Result<MetricField64, Error> {
    let chart = chart_required(mesh)?;
    let axes = chart.axes();
    let n = mesh.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<TrigField> = (0..axes * (axes + 1) / 2)
        .map(|_| TrigField::random(chart.periods(), frequency, &mut rng))
        .collect();
    let xs = barycentres(mesh)?;
    let h: Vec<SmallSym<f64>> = xs
        .iter()
        .map(|x| {
            let upper: Vec<f64> = fields.iter().map(|f| f.eval(x)).collect();
            SmallSym::from_upper(axes, &upper)
        })
        .collect();
    let sup = h.iter().fold(0.0f64, |m, s| m.max(operator_norm(s)));
    let scale = if sup > 0.0 { eps / sup } else { 0.0 };
    let cells = (0..mesh.num_cells())
        .map(|c| {
            let p0 = chart.lift(n, c, 0);
            let e: Vec<Vec<f64>> = (1..=n)
                .map(|k| {
                    chart
                        .lift(n, c, k)
                        .iter()
                        .zip(p0)
                        .map(|(a, b)| a - b)
                        .collect()
                })
                .collect();
            let mut g = *metric.cell(c);
            let mut hv = vec![0.0; axes];
            for i in 0..n {
                h[c].apply(&e[i], &mut hv);
                for j in i..n {
                    let d: f64 = hv.iter().zip(&e[j]).map(|(a, b)| a * b).sum();
                    g.set(i, j, g.get(i, j) + scale * d);
                }
            }
            g
        })
        .collect();
    let out = MetricField::new(n, cells)?;
    out.check_spd()?;
    Ok(out)
}

fn operator_norm(s: &SmallSym<f64>) -> f64 {
    (-s.min_eigenvalue())
        .max(-s.scaled(-1.0).min_eigenvalue())
        .max(0.0)
}

pub fn perturb(
    mesh: &Mesh64,
    metric: &MetricField64,
    mode: PerturbationMode,
    eps: f64,
    frequency: usize,
    seed: u64,
) -> Result<MetricField64, Error> {
    match mode {
        PerturbationMode::Conformal => conformal_perturbation(mesh, metric, eps, frequency, seed),
        PerturbationMode::General => general_perturbation(mesh, metric, eps, frequency, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use eigenmap_core::mesh::build_flat_torus;

    #[test]
    fn fields_are_seeded_and_normalized() {
        let (m, _) = build_flat_torus::<f64>(&[1.0, 1.0], &[6, 6]).unwrap();
        let a = scalar_field(&m, 2, 3).unwrap();
        let b = scalar_field(&m, 2, 3).unwrap();
        let c = scalar_field(&m, 2, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let sup = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        assert!((sup - 1.0).abs() < 1e-15);
    }

    #[test]
    fn general_perturbation_of_flat_cell() {
        let (m, g) = build_flat_torus::<f64>(&[1.0, 1.0, 1.0], &[4, 4, 4]).unwrap();
        let h = general_perturbation(&m, &g, 0.0, 2, 1).unwrap();
        assert!(h.max_abs_diff(&g) < 1e-15);
        let h = general_perturbation(&m, &g, 0.05, 2, 1).unwrap();
        let diff = h.max_abs_diff(&g);
        // entries of E^T H E are bounded by eps |e_i| |e_j| <= eps * 3 h^2
        assert!(diff > 0.0 && diff <= 0.05 * 3.0 / 16.0 + 1e-15);
        assert!(general_perturbation(&m, &g, 10.0, 2, 1).is_err());
    }

    #[test]
    fn sphere_has_no_chart() {
        let (s, gs) = eigenmap_core::mesh::build_icosphere::<f64>(0).unwrap();
        assert_eq!(
            conformal_perturbation(&s, &gs, 0.1, 2, 0)
                .unwrap_err()
                .name(),
            "UnsupportedTopology"
        );
    }
}
