//! Distances on sampled configurations.
//!
//! The lattice side is plain BFS (every edge costs 1). The continuous side
//! is the zero-cost-hop metric
//! `d(x, y) = min |x - u_1| + sum |v_i - u_{i+1}| + |v_m - y|` over chains of
//! long edges `<u_i, v_i>`, computed by Dijkstra over edge endpoints.

mod brute;
mod continuous;
mod lattice;

pub use brute::{brute_force_distance, oracle_instance, BRUTE_FORCE_MAX_ENDPOINTS, ORACLE_EDGES};
pub use continuous::{GapGraph, Parent, Relaxation, SearchTree};
pub use lattice::{bfs_distance, bfs_geodesic, LatticeAdjacency};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    segment_totals, EdgeConfiguration, LatticeBox, PathTrace, Point, TraceKind, Window,
};

/// Where the values of a [`DistanceField`] live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldDomain {
    /// One value per box vertex, in box index order.
    Lattice(LatticeBox),
    /// One value per grid cell, evaluated at the cell centre; row-major with
    /// the first axis most significant.
    Grid {
        window: Window,
        resolution: f64,
        shape: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceField {
    pub domain: FieldDomain,
    pub values: Vec<f64>,
    pub source: Point,
}

impl DistanceField {
    /// Centre of grid cell `idx` (or the vertex itself on a lattice).
    pub fn location(&self, idx: usize) -> Point {
        match &self.domain {
            FieldDomain::Lattice(b) => Point::from_ints(&b.point(idx)),
            FieldDomain::Grid {
                window,
                resolution,
                shape,
            } => Point::from_vec(cell_center(window, *resolution, shape, idx)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub value: f64,
    pub trace: PathTrace,
}

/// Recomputes `(length, hops)` from the segments of `trace` and checks them
/// against the stored totals and the proper-path shape.
pub fn path_stats(trace: &PathTrace) -> Result<(f64, usize)> {
    if trace.nodes.is_empty() || trace.hop_flags.len() + 1 != trace.nodes.len() {
        return Err(Error::MalformedTrace("segment count mismatch".into()));
    }
    if trace.kind == TraceKind::Proper {
        if let Some(i) = trace.hop_flags.windows(2).position(|w| !w[0] && !w[1]) {
            return Err(Error::MalformedTrace(format!(
                "consecutive gaps at segments {i} and {}",
                i + 1
            )));
        }
        let mut hops: Vec<(&Point, &Point)> = trace
            .segments()
            .filter(|s| s.2)
            .map(|(a, b, _)| if a.lex_cmp(b).is_le() { (a, b) } else { (b, a) })
            .collect();
        hops.sort_by(|x, y| x.0.lex_cmp(y.0).then(x.1.lex_cmp(y.1)));
        if hops.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::MalformedTrace("hop used twice".into()));
        }
    }
    let (len, hops) = segment_totals(&trace.nodes, &trace.hop_flags);
    let tol = 1e-9 * len.max(1.0);
    if (len - trace.length_l1).abs() > tol || hops != trace.hop_count {
        return Err(Error::MalformedTrace(format!(
            "stored totals ({}, {}) disagree with segments ({len}, {hops})",
            trace.length_l1, trace.hop_count
        )));
    }
    Ok((len, hops))
}

/// Continuous distance between `x` and `y` using the edges of `config` with
/// both endpoints in `domain` and gaps inside `domain`.
pub fn continuous_distance(
    config: &EdgeConfiguration,
    x: &Point,
    y: &Point,
    domain: &Window,
) -> Result<DistanceResult> {
    continuous_distance_with(config, x, y, domain, Relaxation::Grid)
}

pub fn continuous_distance_with(
    config: &EdgeConfiguration,
    x: &Point,
    y: &Point,
    domain: &Window,
    mode: Relaxation,
) -> Result<DistanceResult> {
    let g = GapGraph::new(config, domain, &[x, y])?;
    if x == y {
        return Ok(DistanceResult {
            value: 0.0,
            trace: PathTrace::point(x.clone()),
        });
    }
    let tree = g.search(0, &[1], mode);
    Ok(DistanceResult {
        value: tree.dist[1],
        trace: g.trace(&tree, 1)?,
    })
}

/// Internal metric of the sub-box `sub`: only edges with both endpoints in
/// `sub` are usable.
pub fn internal_distance(
    config: &EdgeConfiguration,
    x: &Point,
    y: &Point,
    sub: &Window,
) -> Result<DistanceResult> {
    if sub.dim() != config.window.dim() || !config.window.contains_window(sub) {
        return Err(Error::OutOfDomain("sub-window not inside the sample window".into()));
    }
    continuous_distance(config, x, y, sub)
}

/// Distances from `source` to the centres of a grid of cells of side
/// `resolution` covering `domain` (the last cell along an axis is clipped
/// when the side is not a multiple of the resolution).
pub fn continuous_ball_field(
    config: &EdgeConfiguration,
    source: &Point,
    domain: &Window,
    resolution: f64,
) -> Result<DistanceField> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::InvalidParams(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let g = GapGraph::new(config, domain, &[source])?;
    let tree = g.search(0, &[], Relaxation::Grid);
    let shape: Vec<usize> = (0..domain.dim())
        .map(|a| ((domain.side(a) / resolution) - 1e-9).ceil().max(1.0) as usize)
        .collect();
    let total: usize = shape.iter().product();
    if total > 1 << 28 {
        return Err(Error::Resource(format!("{total} raster cells")));
    }
    let values = (0..total)
        .into_par_iter()
        .map(|i| g.distance_to_point(&tree, &cell_center(domain, resolution, &shape, i)))
        .collect();
    Ok(DistanceField {
        domain: FieldDomain::Grid {
            window: domain.clone(),
            resolution,
            shape,
        },
        values,
        source: source.clone(),
    })
}

fn cell_center(window: &Window, resolution: f64, shape: &[usize], mut idx: usize) -> Vec<f64> {
    let d = shape.len();
    let mut c = vec![0.0; d];
    for a in (0..d).rev() {
        let i = idx % shape[a];
        idx /= shape[a];
        let lo = window.lo.coords()[a];
        let hi = window.hi.coords()[a];
        c[a] = (lo + (i as f64 + 0.5) * resolution).min(0.5 * (lo + i as f64 * resolution + hi));
    }
    c
}

/// Pairwise continuous distances between `points`, one Dijkstra per row.
pub fn distance_matrix(
    config: &EdgeConfiguration,
    points: &[Point],
    domain: &Window,
) -> Result<Vec<Vec<f64>>> {
    let refs: Vec<&Point> = points.iter().collect();
    let g = GapGraph::new(config, domain, &refs)?;
    let targets: Vec<usize> = (0..points.len()).collect();
    Ok((0..points.len())
        .into_par_iter()
        .map(|i| {
            let tree = g.search(i, &targets, Relaxation::Grid);
            tree.dist[..points.len()].to_vec()
        })
        .collect())
}
