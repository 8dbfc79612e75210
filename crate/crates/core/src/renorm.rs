//! Coarse-graining continuous samples onto the lattice and checking the
//! deterministic comparison between the two metrics.
//!
//! A window is cut into half-open cubes of side `cell`; lattice vertex `k`
//! stands for `[origin + k cell, origin + (k + 1) cell)`. Two vertices are
//! joined when they are nearest neighbours or some long edge of the sample
//! runs between their cubes. For a sample with scope range `[cell, ∞)` the
//! edge indicators between non-touching cubes are independent with
//! probability `1 - exp(-beta mass(k))`, i.e. the lattice model.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::chi_square_sf;
use crate::metric::{continuous_distance, LatticeAdjacency};
use crate::model::{
    l1_i, EdgeConfiguration, LatticeBox, LatticeGraph, ModelParams, PathTrace, Point, TraceKind,
    Window,
};
use crate::rng::derive_stream;
use crate::sampler::{discrete_edge_prob, sample_continuous};

const DIVIDE_TOL: f64 = 1e-9;

/// Cube decomposition of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub origin: Vec<f64>,
    pub cell: f64,
    pub counts: Vec<i64>,
}

impl CellGrid {
    pub fn new(window: &Window, cell: f64) -> Result<Self> {
        if !(cell.is_finite() && cell > 0.0) {
            return Err(Error::InvalidParams(format!("cell must be positive, got {cell}")));
        }
        let mut counts = Vec::with_capacity(window.dim());
        for a in 0..window.dim() {
            let ratio = window.side(a) / cell;
            if ratio < 1.0 - DIVIDE_TOL {
                return Err(Error::InvalidParams(format!(
                    "cell {cell} is larger than the window side {}",
                    window.side(a)
                )));
            }
            let n = ratio.round();
            if (ratio - n).abs() > DIVIDE_TOL * ratio.max(1.0) {
                return Err(Error::InvalidParams(format!(
                    "cell {cell} does not divide the window side {}",
                    window.side(a)
                )));
            }
            counts.push(n as i64);
        }
        Ok(CellGrid {
            origin: window.lo.coords().to_vec(),
            cell,
            counts,
        })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn lattice_box(&self) -> LatticeBox {
        LatticeBox::new(vec![0; self.dim()], self.counts.iter().map(|n| n - 1).collect())
            .expect("grid has at least one cell per axis")
    }

    /// Cell containing `x`; points on the far window face go to the last cell.
    pub fn cell_of(&self, x: &[f64]) -> Vec<i64> {
        x.iter()
            .enumerate()
            .map(|(a, &v)| self.axis_index(a, v))
            .collect()
    }

    fn axis_index(&self, a: usize, v: f64) -> i64 {
        let k = ((v - self.origin[a]) / self.cell).floor() as i64;
        k.clamp(0, self.counts[a] - 1)
    }

    /// Lower corner of cell `k`.
    pub fn corner(&self, k: &[i64]) -> Point {
        Point::from_vec(
            k.iter()
                .enumerate()
                .map(|(a, &c)| self.origin[a] + c as f64 * self.cell)
                .collect(),
        )
    }
}

/// The coupled lattice graph: cells as vertices, nearest-neighbour edges
/// implicit, and a long edge wherever a sample edge joins two cells at
/// `l1` distance above 1.
pub fn coarse_grain(config: &EdgeConfiguration, cell: f64) -> Result<LatticeGraph> {
    let grid = CellGrid::new(&config.window, cell)?;
    coarse_grain_on(config, &grid)
}

pub fn coarse_grain_on(config: &EdgeConfiguration, grid: &CellGrid) -> Result<LatticeGraph> {
    let lattice_box = grid.lattice_box();
    let mut pairs = Vec::new();
    for e in &config.edges {
        let ka = grid.cell_of(e.a.coords());
        let kb = grid.cell_of(e.b.coords());
        if l1_i(&ka, &kb) > 1 {
            let ia = lattice_box.index(&ka).expect("cell in box");
            let ib = lattice_box.index(&kb).expect("cell in box");
            pairs.push((ia.min(ib), ia.max(ib)));
        }
    }
    LatticeGraph::from_index_pairs(lattice_box, pairs, config.params.clone())
}

/// Cells visited by a path, in order: gaps contribute every cell their
/// segment passes through (one axis step at a time), hops jump straight to
/// the cell of the far endpoint.
pub fn cell_sequence(trace: &PathTrace, grid: &CellGrid) -> Vec<Vec<i64>> {
    let mut seq = vec![grid.cell_of(trace.start().coords())];
    for (a, b, hop) in trace.segments() {
        if hop {
            let k = grid.cell_of(b.coords());
            if seq.last() != Some(&k) {
                seq.push(k);
            }
        } else {
            walk_segment(grid, a.coords(), b.coords(), &mut seq);
        }
    }
    seq
}

/// Appends the cells crossed by the straight segment `p -> q`. Plane
/// crossings are taken in order of their segment parameter; simultaneous
/// crossings are applied one axis at a time in axis order, so consecutive
/// cells are always nearest neighbours.
fn walk_segment(grid: &CellGrid, p: &[f64], q: &[f64], seq: &mut Vec<Vec<i64>>) {
    let d = p.len();
    let start = grid.cell_of(p);
    let end = grid.cell_of(q);
    let mut cur = seq.last().cloned().unwrap_or_else(|| start.clone());
    // The walk resumes from the cell the previous step ended in, which is
    // `start` for every trace produced by this crate.
    let mut crossings: Vec<(f64, usize, i64)> = Vec::new();
    for a in 0..d {
        let (s, e) = (cur[a], end[a]);
        let step = (e - s).signum();
        let span = q[a] - p[a];
        let mut k = s;
        while k != e {
            let plane = if step > 0 { k + 1 } else { k };
            let x = grid.origin[a] + plane as f64 * grid.cell;
            let t = if span != 0.0 { ((x - p[a]) / span).clamp(0.0, 1.0) } else { 0.0 };
            crossings.push((t, a, step));
            k += step;
        }
    }
    crossings.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    for (_, a, step) in crossings {
        cur[a] += step;
        seq.push(cur.clone());
    }
}

/// Backward loop erasure: keep the first cell, jump to just after its last
/// occurrence, and repeat. The result never repeats a cell.
pub fn loop_erase(seq: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < seq.len() {
        let last = seq
            .iter()
            .rposition(|k| *k == seq[i])
            .expect("element occurs in its own sequence");
        out.push(seq[i].clone());
        i = last + 1;
    }
    out
}

/// Loop-erased cell path of a continuous trace.
pub fn skeleton_path(trace: &PathTrace, grid: &CellGrid) -> Result<Vec<Vec<i64>>> {
    if trace.nodes.is_empty() {
        return Err(Error::MalformedTrace("empty trace".into()));
    }
    if trace.start().dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: trace.start().dim(),
        });
    }
    Ok(loop_erase(&cell_sequence(trace, grid)))
}

/// A continuous path from `x` to `y` following the lattice path `cells`
/// (which must start at the cell of `x` and end at the cell of `y`): a
/// lattice long edge is crossed on a sample edge joining the two cells, a
/// nearest-neighbour step is a straight gap to the lower corner of the next
/// cell.
pub fn realize_discrete_path(
    config: &EdgeConfiguration,
    grid: &CellGrid,
    cells: &[Vec<i64>],
    x: &Point,
    y: &Point,
) -> Result<PathTrace> {
    if cells.is_empty() {
        return Err(Error::MalformedTrace("empty lattice path".into()));
    }
    if grid.cell_of(x.coords()) != cells[0] || grid.cell_of(y.coords()) != *cells.last().unwrap() {
        return Err(Error::Precondition(
            "lattice path must run from the cell of x to the cell of y".into(),
        ));
    }
    let mut nodes = vec![x.clone()];
    let mut flags = Vec::new();
    for w in cells.windows(2) {
        let (from, to) = (&w[0], &w[1]);
        match l1_i(from, to) {
            0 => {}
            1 => {
                nodes.push(grid.corner(to));
                flags.push(false);
            }
            _ => {
                let (near, far) = witness_edge(config, grid, from, to).ok_or_else(|| {
                    Error::CouplingViolated(format!(
                        "no sample edge joins cells {from:?} and {to:?}"
                    ))
                })?;
                nodes.push(near);
                flags.push(false);
                nodes.push(far);
                flags.push(true);
            }
        }
    }
    nodes.push(y.clone());
    flags.push(false);
    PathTrace::new(nodes, flags, TraceKind::Stepwise)
}

/// First sample edge (canonical order) between cells `from` and `to`,
/// returned as (endpoint in `from`, endpoint in `to`).
fn witness_edge(
    config: &EdgeConfiguration,
    grid: &CellGrid,
    from: &[i64],
    to: &[i64],
) -> Option<(Point, Point)> {
    config.edges.iter().find_map(|e| {
        let ka = grid.cell_of(e.a.coords());
        let kb = grid.cell_of(e.b.coords());
        if ka == from && kb == to {
            Some((e.a.clone(), e.b.clone()))
        } else if kb == from && ka == to {
            Some((e.b.clone(), e.a.clone()))
        } else {
            None
        }
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub pairs_tested: usize,
    pub forward_violations: usize,
    pub reverse_violations: usize,
    /// Pairs in one cell whose distance exceeds one cell side; the forward
    /// bound `3d d_hat + 1` does not apply to them (see `coupling_check`).
    pub same_cell_wide: usize,
    /// Skeleton paths that were not valid lattice paths.
    pub skeleton_failures: usize,
    pub mean_hops: f64,
    pub max_hops: usize,
    /// Largest `d / (3d d_hat + 1)` over pairs in distinct cells.
    pub max_forward_ratio: f64,
    /// Largest `d_hat - sqrt(d) d - (2d + 1)(h + 1)`; nonpositive when the
    /// reverse bound holds.
    pub max_reverse_excess: f64,
}

impl CouplingReport {
    pub fn passed(&self) -> bool {
        self.forward_violations == 0 && self.reverse_violations == 0 && self.skeleton_failures == 0
    }
}

/// Checks, for each query pair, the two comparison inequalities between the
/// continuous distance `d` (in cell units) and the chemical distance
/// `d_hat` of the coarse-grained sample:
///
/// * forward: `d <= 3 d_hat d + 1` for points in distinct cells, witnessed by
///   realizing a lattice geodesic continuously; for points in one cell only
///   `d <= |x - y|` is checked, since `|x - y|` can reach `sqrt(d)` cells;
/// * reverse: `d_hat <= sqrt(d) d + (2d + 1)(h + 1)` with `h` the hop count
///   of the computed continuous geodesic, whose skeleton must itself be a
///   lattice path.
///
/// Query points must lie in the inner half of the window.
pub fn coupling_check(
    config: &EdgeConfiguration,
    cell: f64,
    pairs: &[(Point, Point)],
) -> Result<CouplingReport> {
    let grid = CellGrid::new(&config.window, cell)?;
    let graph = coarse_grain_on(config, &grid)?;
    let adj = LatticeAdjacency::new(&graph);
    let core = config.window.shrunk(0.5);
    let d = grid.dim() as f64;
    let eps = 1e-9;
    let mut rep = CouplingReport {
        max_reverse_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut hop_total = 0usize;
    for (x, y) in pairs {
        if !(core.contains(x) && core.contains(y)) {
            return Err(Error::OutOfDomain(format!(
                "query pair ({x}, {y}) is outside the window core"
            )));
        }
        let kx = grid.cell_of(x.coords());
        let ky = grid.cell_of(y.coords());
        let geo = continuous_distance(config, x, y, &config.window)?;
        let value = geo.value / cell;
        let hops = geo.trace.hop_count;
        let lattice = adj.geodesic(&kx, &ky)?;
        let dhat = lattice.value;

        if kx == ky {
            if geo.value > x.dist(y) + eps {
                rep.forward_violations += 1;
            }
            if x.dist(y) > cell {
                rep.same_cell_wide += 1;
            }
        } else {
            let bound = 3.0 * d * dhat + 1.0;
            rep.max_forward_ratio = rep.max_forward_ratio.max(value / bound);
            let cells: Vec<Vec<i64>> = lattice
                .trace
                .nodes
                .iter()
                .map(|p| p.coords().iter().map(|&c| c as i64).collect())
                .collect();
            let realized = realize_discrete_path(config, &grid, &cells, x, y)?;
            let realized_len = realized.length_l1 / cell;
            if value > bound + eps || realized_len > bound + eps || value > realized_len + eps {
                rep.forward_violations += 1;
            }
        }

        let excess = dhat - d.sqrt() * value - (2.0 * d + 1.0) * (hops as f64 + 1.0);
        rep.max_reverse_excess = rep.max_reverse_excess.max(excess);
        if excess > eps {
            rep.reverse_violations += 1;
        }

        let skeleton = skeleton_path(&geo.trace, &grid)?;
        if !is_lattice_path(&graph, &skeleton)
            || skeleton.first() != Some(&kx)
            || skeleton.last() != Some(&ky)
            || ((skeleton.len() - 1) as f64) < dhat
        {
            rep.skeleton_failures += 1;
        }

        hop_total += hops;
        rep.max_hops = rep.max_hops.max(hops);
        rep.pairs_tested += 1;
    }
    if rep.pairs_tested > 0 {
        rep.mean_hops = hop_total as f64 / rep.pairs_tested as f64;
    } else {
        rep.max_reverse_excess = 0.0;
    }
    Ok(rep)
}

/// True when consecutive cells are equal-free and joined by an edge of `graph`.
pub fn is_lattice_path(graph: &LatticeGraph, cells: &[Vec<i64>]) -> bool {
    cells.iter().all(|k| graph.lattice_box.contains(k))
        && cells.windows(2).all(|w| {
            let l = l1_i(&w[0], &w[1]);
            l == 1 || (l > 1 && graph.has_long_edge(&w[0], &w[1]))
        })
}

/// Pooled edge counts for one orbit of cell displacements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitCount {
    /// Sorted absolute displacement.
    pub orbit: Vec<i64>,
    /// Cell pairs per sample with a displacement in the orbit.
    pub pairs: u64,
    pub hits: u64,
    pub probability: f64,
    /// Standardized residual of `hits` against the binomial mean.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub samples: u64,
    pub orbits: Vec<OrbitCount>,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn orbit_of(k: &[i64]) -> Vec<i64> {
    let mut o: Vec<i64> = k.iter().map(|c| c.abs()).collect();
    o.sort_unstable();
    o
}

/// Compares coarse-grained edge frequencies with the lattice model.
///
/// Unit-scope samples on `[0, cells]^d` are coarse-grained at cell side 1;
/// the indicators of all cell pairs are pooled by the orbit of their
/// displacement `k` (non-touching, Euclidean norm at most `max_norm`).
/// Distinct cell pairs are independent, so each pooled count is binomial
/// with success probability `discrete_edge_prob(k)`; the chi-square
/// statistic sums the squared standardized residuals, one degree of freedom
/// per orbit.
pub fn coarse_grain_marginals(
    d: usize,
    beta: f64,
    cells: i64,
    max_norm: f64,
    samples: u64,
    seed: u64,
) -> Result<MarginalReport> {
    if samples == 0 {
        return Err(Error::InvalidParams("need at least one sample".into()));
    }
    let in_range = |o: &[i64]| {
        o.iter().copied().max().unwrap_or(0) >= 2
            && o.iter().map(|c| (c * c) as f64).sum::<f64>().sqrt() <= max_norm
    };
    let lattice = LatticeBox::cube(d, 0, cells - 1)?;
    let mut pairs: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
    for i in 0..lattice.len() {
        let a = lattice.point(i);
        for j in i + 1..lattice.len() {
            let b = lattice.point(j);
            let k: Vec<i64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
            let o = orbit_of(&k);
            if in_range(&o) {
                *pairs.entry(o).or_default() += 1;
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidParams(format!(
            "no non-touching orbit fits in {cells} cells with norm <= {max_norm}"
        )));
    }
    let params = ModelParams::new(d, beta, 1.0, f64::INFINITY, seed)?;
    let window = Window::cube(d, 0.0, cells as f64)?;
    let per_sample: Vec<BTreeMap<Vec<i64>, u64>> = (0..samples)
        .into_par_iter()
        .map(|s| -> Result<BTreeMap<Vec<i64>, u64>> {
            let stream = derive_stream(seed, &format!("marginals/{s}"));
            let graph = coarse_grain(&sample_continuous(&params, &window, &stream)?, 1.0)?;
            let mut hits = BTreeMap::new();
            for (a, b) in graph.edge_points() {
                let k: Vec<i64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
                let o = orbit_of(&k);
                if pairs.contains_key(&o) {
                    *hits.entry(o).or_default() += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    let lattice_params = ModelParams::discrete(d, beta, seed)?;
    let mut orbits = Vec::with_capacity(pairs.len());
    let mut chi_square = 0.0;
    for (orbit, &count) in &pairs {
        let hits: u64 = per_sample.iter().map(|h| h.get(orbit).copied().unwrap_or(0)).sum();
        let p = discrete_edge_prob(&lattice_params, orbit)?;
        let n = (count * samples) as f64;
        let z = (hits as f64 - n * p) / (n * p * (1.0 - p)).sqrt();
        chi_square += z * z;
        orbits.push(OrbitCount {
            orbit: orbit.clone(),
            pairs: count,
            hits,
            probability: p,
            z,
        });
    }
    let dof = orbits.len();
    Ok(MarginalReport {
        samples,
        orbits,
        chi_square,
        dof,
        p_value: chi_square_sf(chi_square, dof as f64)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonicalize_edge, ModelParams};

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn cfg(d: usize, side: f64, edges: &[(&[f64], &[f64])]) -> EdgeConfiguration {
        let params = ModelParams::new(d, 1.0, 1.0, f64::INFINITY, 0).unwrap();
        let mut c = EdgeConfiguration::empty(params, Window::cube(d, 0.0, side).unwrap());
        for (a, b) in edges {
            c.edges.push(canonicalize_edge(p(a), p(b)).unwrap());
        }
        c.sort_edges();
        c
    }

    #[test]
    fn grid_rejects_bad_cells() {
        let w = Window::cube(2, 0.0, 10.0).unwrap();
        assert!(CellGrid::new(&w, 3.0).is_err());
        assert!(CellGrid::new(&w, 20.0).is_err());
        assert!(CellGrid::new(&w, 0.0).is_err());
        let g = CellGrid::new(&w, 2.5).unwrap();
        assert_eq!(g.counts, vec![4, 4]);
        assert_eq!(g.cell_of(&[2.5, 9.99]), vec![1, 3]);
        assert_eq!(g.cell_of(&[10.0, 0.0]), vec![3, 0]);
    }

    #[test]
    fn no_edges_gives_bare_lattice() {
        let g = coarse_grain(&cfg(2, 8.0, &[]), 1.0).unwrap();
        assert!(g.long_edges.is_empty());
        assert_eq!(g.lattice_box.len(), 64);
    }

    #[test]
    fn one_edge_one_lattice_edge() {
        let c = cfg(2, 8.0, &[(&[0.5, 0.5], &[5.5, 5.2])]);
        let g = coarse_grain(&c, 1.0).unwrap();
        assert_eq!(g.long_edges.len(), 1);
        assert!(g.has_long_edge(&[0, 0], &[5, 5]));
    }

    #[test]
    fn loop_erasure_examples() {
        let k = |i: i64| vec![i];
        assert_eq!(loop_erase(&[k(1), k(2), k(1), k(3)]), vec![k(1), k(3)]);
        assert_eq!(loop_erase(&[k(1), k(2), k(3)]), vec![k(1), k(2), k(3)]);
        assert_eq!(loop_erase(&[k(4)]), vec![k(4)]);
        assert_eq!(
            loop_erase(&[k(1), k(2), k(3), k(2), k(4), k(1), k(5)]),
            vec![k(1), k(5)]
        );
    }

    #[test]
    fn segment_walk_steps_one_axis_at_a_time() {
        let w = Window::cube(2, 0.0, 4.0).unwrap();
        let g = CellGrid::new(&w, 1.0).unwrap();
        // passes exactly through the corner (2, 2)
        let t = PathTrace::new(vec![p(&[0.5, 0.5]), p(&[3.5, 3.5])], vec![false], TraceKind::Proper)
            .unwrap();
        let seq = cell_sequence(&t, &g);
        assert_eq!(seq.first().unwrap(), &vec![0, 0]);
        assert_eq!(seq.last().unwrap(), &vec![3, 3]);
        assert_eq!(seq.len(), 7);
        for w in seq.windows(2) {
            assert_eq!(l1_i(&w[0], &w[1]), 1);
        }
    }

    #[test]
    fn realized_nearest_neighbour_path_length() {
        let c = cfg(2, 8.0, &[]);
        let g = CellGrid::new(&c.window, 1.0).unwrap();
        let cells: Vec<Vec<i64>> = vec![vec![2, 2], vec![2, 3], vec![3, 3], vec![3, 2], vec![4, 2]];
        let x = p(&[2.9, 2.1]);
        let y = p(&[4.7, 2.9]);
        let t = realize_discrete_path(&c, &g, &cells, &x, &y).unwrap();
        let l = (cells.len() - 1) as f64;
        assert!(t.length_l1 <= 3.0 * 2.0 * l + 1.0);
        assert_eq!(t.hop_count, 0);
    }

    #[test]
    fn realized_hop_uses_sample_edge() {
        let c = cfg(1, 10.0, &[(&[1.5], &[7.2])]);
        let g = CellGrid::new(&c.window, 1.0).unwrap();
        let t = realize_discrete_path(&c, &g, &[vec![1], vec![7]], &p(&[1.2]), &p(&[7.9])).unwrap();
        assert_eq!(t.hop_count, 1);
        assert!((t.length_l1 - (0.3 + 0.7)).abs() < 1e-12);
        assert!(realize_discrete_path(&c, &g, &[vec![1], vec![5]], &p(&[1.2]), &p(&[5.5])).is_err());
    }

    #[test]
    fn coupling_without_edges_in_one_dimension() {
        let c = cfg(1, 16.0, &[]);
        let pairs = vec![(p(&[4.2]), p(&[11.7])), (p(&[5.0]), p(&[5.5])), (p(&[6.0]), p(&[6.0]))];
        let r = coupling_check(&c, 1.0, &pairs).unwrap();
        assert_eq!(r.pairs_tested, 3);
        assert!(r.passed(), "{r:?}");
        assert!(coupling_check(&c, 1.0, &[(p(&[0.5]), p(&[5.0]))]).is_err());
    }

    #[test]
    fn coarse_grain_is_scale_equivariant() {
        let c = cfg(2, 8.0, &[(&[0.5, 0.5], &[5.5, 5.2]), (&[7.5, 0.1], &[2.2, 6.6])]);
        let a = coarse_grain(&c, 1.0).unwrap();
        let b = coarse_grain(&c.scaled(3.0), 3.0).unwrap();
        assert_eq!(a.long_edges, b.long_edges);
        assert_eq!(a.lattice_box, b.lattice_box);
    }
}
