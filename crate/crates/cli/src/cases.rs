use eigenmap_core::mesh::*;
use eigenmap_core::{Error, Mesh64, MetricField64};

use crate::config::{CaseConfig, CaseKind, FiberKind, Gluing};

pub struct Case {
    pub mesh: Mesh64,
    pub metric: MetricField64,
}

pub fn build_case(cfg: &CaseConfig) -> Result<Case, Error> {
    build_case_at(cfg, cfg.subdivisions)
}

/// Same as [`build_case`] with the icosphere level overridden.
pub fn build_case_at(cfg: &CaseConfig, subdivisions: usize) -> Result<Case, Error> {
    let (mesh, metric) = match cfg.kind {
        CaseKind::FlatTorus => build_flat_torus(&cfg.periods, &cfg.resolution)?,
        CaseKind::Sphere => build_icosphere(subdivisions)?,
        CaseKind::ProductSphere => {
            let (c, gc) = build_flat_torus(&[cfg.circle_length], &[cfg.segments])?;
            let (s, gs) = build_icosphere(subdivisions)?;
            build_product((&c, &gc), (&s, &gs))?
        }
        CaseKind::MappingTorus => {
            let n = cfg.fiber_resolution;
            let (f, gf) = match cfg.fiber {
                FiberKind::Kuhn => build_flat_torus(&cfg.fiber_periods, &[n, n])?,
                FiberKind::Crossed => build_crossed_torus(cfg.fiber_periods, [n, n])?,
            };
            let phi = match (cfg.gluing, cfg.fiber) {
                (Gluing::Identity, _) => identity_permutation(f.num_vertices()),
                (Gluing::QuarterTurn, FiberKind::Crossed) => crossed_torus_quarter_turn(n),
                (Gluing::QuarterTurn, FiberKind::Kuhn) => {
                    torus_lattice_map([n, n], [[0, -1], [1, 0]])
                }
                (Gluing::Matrix, FiberKind::Kuhn) => torus_lattice_map([n, n], cfg.gluing_matrix),
                (Gluing::Matrix, FiberKind::Crossed) => {
                    return Err(Error::InvalidGluing(
                        "matrix gluing needs the kuhn fiber".into(),
                    ))
                }
            };
            build_mapping_torus((&f, &gf), &phi, cfg.layers)?
        }
    };
    Ok(Case { mesh, metric })
}

/// Winding vector from the config, or one turn along the first generator.
pub fn winding_for(mesh: &Mesh64, requested: Option<&[i64]>) -> Result<Vec<i64>, Error> {
    if let Some(w) = requested {
        return Ok(w.to_vec());
    }
    let chart = mesh
        .chart()
        .ok_or_else(|| Error::UnsupportedTopology("mesh has no periodic chart".into()))?;
    let count = chart.periods().iter().filter(|p| p.is_some()).count();
    if count == 0 {
        return Err(Error::UnsupportedTopology(
            "mesh has no periodic generators".into(),
        ));
    }
    let mut w = vec![0; count];
    w[0] = 1;
    Ok(w)
}
