//! Plain-text mesh format:
//!
//! ```text
//! dim <n> vertices <V> cells <C>
//! <v_0> ... <v_n>                  (C lines)
//! <g_00> <g_01> ... <g_nn>         (C lines, upper triangle, row-major)
//! ```
//!
//! Metric entries are written with the shortest round-trip decimal
//! representation, so a dump followed by a load reproduces the metric bitwise.

use std::fmt::Write as _;

use super::{Mesh, MetricField};
use crate::error::{Error, Result};
use crate::linalg::SmallSym;
use crate::scalar::Scalar;

pub fn dump_mesh<T: Scalar>(mesh: &Mesh<T>, metric: &MetricField<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "dim {} vertices {} cells {}",
        mesh.dim(),
        mesh.num_vertices(),
        mesh.num_cells()
    );
    for cell in mesh.cells() {
        let ids: Vec<String> = cell.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", ids.join(" "));
    }
    for g in metric.cells() {
        let vals: Vec<String> = g.upper().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", vals.join(" "));
    }
    s
}

pub fn load_mesh<T: Scalar>(text: &str) -> Result<(Mesh<T>, MetricField<T>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty mesh file".into()))?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.len() != 6 || tok[0] != "dim" || tok[2] != "vertices" || tok[4] != "cells" {
        return Err(Error::Parse(format!("bad header: {header}")));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| Error::Parse(format!("{s}: {e}")))
    };
    let (dim, nv, nc) = (num(tok[1])?, num(tok[3])?, num(tok[5])?);
    if !(1..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let mut cells = Vec::with_capacity(nc * (dim + 1));
    for _ in 0..nc {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse("truncated cell block".into()))?;
        let ids = line
            .split_whitespace()
            .map(num)
            .collect::<Result<Vec<_>>>()?;
        if ids.len() != dim + 1 {
            return Err(Error::Parse(format!("cell line has {} ids", ids.len())));
        }
        cells.extend(ids);
    }
    let width = dim * (dim + 1) / 2;
    let mut metric = Vec::with_capacity(nc);
    for _ in 0..nc {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse("truncated metric block".into()))?;
        let vals = line
            .split_whitespace()
            .map(|s| {
                s.parse::<T>()
                    .map_err(|_| Error::Parse(format!("bad number {s}")))
            })
            .collect::<Result<Vec<T>>>()?;
        if vals.len() != width {
            return Err(Error::Parse(format!(
                "metric line has {} entries",
                vals.len()
            )));
        }
        metric.push(SmallSym::from_upper(dim, &vals));
    }
    Ok((Mesh::new(dim, nv, cells)?, MetricField::new(dim, metric)?))
}
