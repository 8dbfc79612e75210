//! The continuous metric: straight gaps cost their Euclidean length, long
//! edges cost nothing.
//!
//! Each long edge is contracted into one search node that owns both of its
//! endpoints; query points are single-endpoint nodes. Moving between nodes is
//! a gap between one endpoint of each, so the search graph is complete. The
//! default relaxation avoids touching all `O(M^2)` gap arcs: endpoints are
//! bucketed in a uniform grid, and a settled node expands shell by shell
//! around each of its endpoints. The shell at Chebyshev cell distance `s` is
//! only scanned once the queue reaches `dist + (s - 1) h`, a lower bound on
//! every gap into it, which keeps Dijkstra's settle order exact. The goal
//! heuristic is zero: long edges undercut Euclidean distance, so no
//! Euclidean lower bound is admissible.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::model::{euclid, EdgeConfiguration, PathTrace, Point, TraceKind, Window};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relaxation {
    /// Grid buckets with lazily expanded shells.
    Grid,
    /// Relax every gap arc of a settled node.
    Dense,
}

/// Endpoint set of a domain-restricted configuration plus query points.
#[derive(Debug, Clone)]
pub struct GapGraph {
    d: usize,
    coords: Vec<f64>,
    owner: Vec<u32>,
    /// `ends[node]` = first endpoint id; a node with two endpoints owns
    /// `first` and `first + 1`.
    first_end: Vec<u32>,
    two_ends: Vec<bool>,
    points: usize,
    grid: EndpointGrid,
}

impl GapGraph {
    /// Nodes `0..points.len()` are the query points; the rest are the edges
    /// of `config` with both endpoints in `domain`, in canonical order.
    pub fn new(config: &EdgeConfiguration, domain: &Window, points: &[&Point]) -> Result<Self> {
        let d = domain.dim();
        if config.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: config.dim(),
            });
        }
        for p in points {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.dim(),
                });
            }
            if !domain.contains(p) {
                return Err(Error::OutOfDomain(p.to_string()));
            }
        }
        let mut coords = Vec::new();
        let mut owner = Vec::new();
        let mut first_end = Vec::new();
        let mut two_ends = Vec::new();
        for (i, p) in points.iter().enumerate() {
            first_end.push(owner.len() as u32);
            two_ends.push(false);
            coords.extend_from_slice(p.coords());
            owner.push(i as u32);
        }
        for e in &config.edges {
            if !(domain.contains(&e.a) && domain.contains(&e.b)) {
                continue;
            }
            let node = first_end.len() as u32;
            first_end.push(owner.len() as u32);
            two_ends.push(true);
            coords.extend_from_slice(e.a.coords());
            coords.extend_from_slice(e.b.coords());
            owner.push(node);
            owner.push(node);
        }
        if owner.len() >= NONE as usize {
            return Err(Error::Resource("too many endpoints".into()));
        }
        let grid = EndpointGrid::new(domain, &coords, d);
        Ok(GapGraph {
            d,
            coords,
            owner,
            first_end,
            two_ends,
            points: points.len(),
            grid,
        })
    }

    pub fn node_count(&self) -> usize {
        self.first_end.len()
    }

    pub fn endpoint_count(&self) -> usize {
        self.owner.len()
    }

    pub fn edge_count(&self) -> usize {
        self.node_count() - self.points
    }

    fn end(&self, e: u32) -> &[f64] {
        let i = e as usize * self.d;
        &self.coords[i..i + self.d]
    }

    fn ends_of(&self, node: u32) -> std::ops::Range<u32> {
        let f = self.first_end[node as usize];
        f..f + if self.two_ends[node as usize] { 2 } else { 1 }
    }

    /// Shortest-path tree from `source`, stopped once every node in
    /// `targets` is settled (all nodes when `targets` is empty).
    pub fn search(&self, source: usize, targets: &[usize], mode: Relaxation) -> SearchTree {
        match mode {
            Relaxation::Grid => self.search_grid(source, targets),
            Relaxation::Dense => self.search_dense(source, targets),
        }
    }

    fn search_grid(&self, source: usize, targets: &[usize]) -> SearchTree {
        let n = self.node_count();
        let mut tree = SearchTree::new(n, source);
        let mut settled = vec![false; n];
        let mut pending = pending_targets(n, targets);
        let mut remaining = pending.iter().filter(|&&b| b).count();
        // (key bits, kind, id, shell): kind 0 = node, 1 = shell scan
        let mut heap: BinaryHeap<Reverse<(u64, u8, u32, u32)>> = BinaryHeap::new();
        heap.push(Reverse((0f64.to_bits(), 0, source as u32, 0)));
        while let Some(Reverse((key, kind, id, shell))) = heap.pop() {
            let keyf = f64::from_bits(key);
            if kind == 0 {
                let u = id as usize;
                if settled[u] || keyf > tree.dist[u] {
                    continue;
                }
                settled[u] = true;
                if pending[u] {
                    pending[u] = false;
                    remaining -= 1;
                    if remaining == 0 {
                        break;
                    }
                }
                for e in self.ends_of(id) {
                    heap.push(Reverse((key, 1, e, 0)));
                }
            } else {
                let e = id;
                let u = self.owner[e as usize] as usize;
                let du = tree.dist[u];
                let p = self.end(e);
                let center = self.grid.cell_of(p);
                let more = self.grid.for_each_in_shell(&center, shell as usize, |q| {
                    let v = self.owner[q as usize] as usize;
                    if settled[v] {
                        return;
                    }
                    let nd = du + euclid(p, self.end(q));
                    if tree.offer(v, nd, u as u32, e, q) {
                        heap.push(Reverse((nd.to_bits(), 0, v as u32, 0)));
                    }
                });
                if more {
                    let next_key = du + shell as f64 * self.grid.h;
                    heap.push(Reverse((next_key.to_bits(), 1, e, shell + 1)));
                }
            }
        }
        tree
    }

    fn search_dense(&self, source: usize, targets: &[usize]) -> SearchTree {
        let n = self.node_count();
        let mut tree = SearchTree::new(n, source);
        let mut settled = vec![false; n];
        let mut pending = pending_targets(n, targets);
        let mut remaining = pending.iter().filter(|&&b| b).count();
        let mut heap: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::new();
        heap.push(Reverse((0f64.to_bits(), source as u32)));
        while let Some(Reverse((key, id))) = heap.pop() {
            let u = id as usize;
            if settled[u] || f64::from_bits(key) > tree.dist[u] {
                continue;
            }
            settled[u] = true;
            if pending[u] {
                pending[u] = false;
                remaining -= 1;
                if remaining == 0 {
                    break;
                }
            }
            for e in self.ends_of(id) {
                let p = self.end(e);
                for q in 0..self.owner.len() as u32 {
                    let v = self.owner[q as usize] as usize;
                    if settled[v] {
                        continue;
                    }
                    let nd = tree.dist[u] + euclid(p, self.end(q));
                    if tree.offer(v, nd, id, e, q) {
                        heap.push(Reverse((nd.to_bits(), v as u32)));
                    }
                }
            }
        }
        tree
    }

    /// Proper trace from the tree root to `target`: gaps and hops alternate.
    pub fn trace(&self, tree: &SearchTree, target: usize) -> Result<PathTrace> {
        if !tree.dist[target].is_finite() {
            return Err(Error::Precondition(format!("node {target} was not reached")));
        }
        // (node, entry endpoint) from target back to the root
        let mut chain = Vec::new();
        let mut cur = target;
        while cur != tree.root {
            let par = tree.parent[cur];
            chain.push((cur, par.entry, par.exit));
            cur = par.node as usize;
        }
        chain.reverse();
        let root_end = self.first_end[tree.root];
        let mut nodes = vec![Point::from_vec(self.end(root_end).to_vec())];
        let mut flags = Vec::new();
        // For each intermediate edge node: entered at chain[i].1, left at chain[i + 1].2.
        for i in 0..chain.len().saturating_sub(1) {
            let entry = chain[i].1;
            let exit = chain[i + 1].2;
            if entry == exit {
                continue;
            }
            nodes.push(Point::from_vec(self.end(entry).to_vec()));
            flags.push(false);
            nodes.push(Point::from_vec(self.end(exit).to_vec()));
            flags.push(true);
        }
        if target != tree.root {
            let last = chain.last().expect("nonempty chain").1;
            nodes.push(Point::from_vec(self.end(last).to_vec()));
            flags.push(false);
        }
        PathTrace::new(nodes, flags, TraceKind::Proper)
    }

    /// `min(|source - c|, min_u dist(u) + |end(u) - c|)`: the distance from
    /// the tree root to an arbitrary point `c` of the domain.
    pub fn distance_to_point(&self, tree: &SearchTree, c: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        let cell = self.grid.cell_of(c);
        let mut shell = 0usize;
        loop {
            if shell > 0 && (shell as f64 - 1.0) * self.grid.h >= best {
                break;
            }
            let more = self.grid.for_each_in_shell(&cell, shell, |q| {
                let du = tree.dist[self.owner[q as usize] as usize];
                if du.is_finite() {
                    best = best.min(du + euclid(self.end(q), c));
                }
            });
            if !more {
                break;
            }
            shell += 1;
        }
        best
    }
}

fn pending_targets(n: usize, targets: &[usize]) -> Vec<bool> {
    let mut pending = vec![targets.is_empty(); n];
    for &t in targets {
        pending[t] = true;
    }
    pending
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Parent {
    pub node: u32,
    /// Endpoint of the parent node the gap leaves from.
    pub exit: u32,
    /// Endpoint of this node the gap arrives at.
    pub entry: u32,
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    pub root: usize,
    pub dist: Vec<f64>,
    pub parent: Vec<Parent>,
}

impl SearchTree {
    fn new(n: usize, root: usize) -> Self {
        let mut dist = vec![f64::INFINITY; n];
        dist[root] = 0.0;
        SearchTree {
            root,
            dist,
            parent: vec![
                Parent {
                    node: NONE,
                    exit: NONE,
                    entry: NONE,
                };
                n
            ],
        }
    }

    /// Records `(via, exit, entry)` as parent of `v` if `nd` improves its
    /// distance; exact ties go to the lexicographically smaller parent.
    /// Returns true when the distance decreased.
    fn offer(&mut self, v: usize, nd: f64, via: u32, exit: u32, entry: u32) -> bool {
        if v == self.root {
            return false;
        }
        let cand = Parent {
            node: via,
            exit,
            entry,
        };
        if nd < self.dist[v] {
            self.dist[v] = nd;
            self.parent[v] = cand;
            true
        } else {
            if nd == self.dist[v] && cand < self.parent[v] {
                self.parent[v] = cand;
            }
            false
        }
    }
}

/// Uniform grid over the domain with endpoint ids bucketed per cell.
#[derive(Debug, Clone)]
struct EndpointGrid {
    lo: Vec<f64>,
    h: f64,
    dims: Vec<usize>,
    start: Vec<u32>,
    items: Vec<u32>,
}

impl EndpointGrid {
    fn new(domain: &Window, coords: &[f64], d: usize) -> Self {
        let n = coords.len() / d;
        let lo = domain.lo.coords().to_vec();
        let sides: Vec<f64> = (0..d).map(|a| domain.side(a)).collect();
        let max_side = sides.iter().cloned().fold(0.0, f64::max);
        // About two endpoints per cell, at most ~4n + 64 cells.
        let mut h = if n == 0 {
            max_side
        } else {
            (2.0 * domain.volume() / n as f64).powf(1.0 / d as f64)
        };
        h = h.max(max_side * 1e-6);
        let cells_for = |h: f64| -> f64 {
            sides
                .iter()
                .map(|s| (s / h).ceil().max(1.0))
                .product::<f64>()
        };
        while cells_for(h) > 4.0 * n as f64 + 64.0 {
            h *= 1.25;
        }
        let dims: Vec<usize> = sides
            .iter()
            .map(|s| ((s / h).ceil() as usize).max(1))
            .collect();
        let total: usize = dims.iter().product();
        let mut grid = EndpointGrid {
            lo,
            h,
            dims,
            start: vec![0; total + 1],
            items: vec![0; n],
        };
        let cell_ids: Vec<usize> = (0..n)
            .map(|e| grid.flat(&grid.cell_of(&coords[e * d..(e + 1) * d])))
            .collect();
        for &c in &cell_ids {
            grid.start[c + 1] += 1;
        }
        for c in 0..total {
            grid.start[c + 1] += grid.start[c];
        }
        let mut fill: Vec<u32> = grid.start[..total].to_vec();
        for (e, &c) in cell_ids.iter().enumerate() {
            grid.items[fill[c] as usize] = e as u32;
            fill[c] += 1;
        }
        grid
    }

    fn cell_of(&self, p: &[f64]) -> Vec<usize> {
        p.iter()
            .enumerate()
            .map(|(a, &x)| {
                let c = ((x - self.lo[a]) / self.h).floor();
                if c <= 0.0 {
                    0
                } else {
                    (c as usize).min(self.dims[a] - 1)
                }
            })
            .collect()
    }

    fn flat(&self, c: &[usize]) -> usize {
        c.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&x, &dim)| acc * dim + x)
    }

    fn cell_items(&self, c: &[usize]) -> &[u32] {
        let f = self.flat(c);
        &self.items[self.start[f] as usize..self.start[f + 1] as usize]
    }

    /// Visits endpoints in cells at Chebyshev distance exactly `s` from
    /// `center`. Returns false when no cell lies at distance `s` or beyond.
    fn for_each_in_shell(&self, center: &[usize], s: usize, mut f: impl FnMut(u32)) -> bool {
        let d = self.dims.len();
        let reach = (0..d)
            .map(|a| center[a].max(self.dims[a] - 1 - center[a]))
            .max()
            .unwrap_or(0);
        if s > reach {
            return false;
        }
        if s == 0 {
            for &q in self.cell_items(center) {
                f(q);
            }
            return true;
        }
        let si = s as i64;
        let range = |a: usize| {
            let lo = (center[a] as i64 - si).max(0);
            let hi = (center[a] as i64 + si).min(self.dims[a] as i64 - 1);
            (lo, hi)
        };
        let mut cell = vec![0usize; d];
        // Iterate the first d-1 axes over the clipped cube; the last axis is
        // either the full clipped range (if an outer axis sits on the shell)
        // or just its two shell faces.
        let outer: Vec<(i64, i64)> = (0..d - 1).map(range).collect();
        let mut idx: Vec<i64> = outer.iter().map(|r| r.0).collect();
        let (llo, lhi) = range(d - 1);
        let clast = center[d - 1] as i64;
        loop {
            let on_shell = (0..d - 1).any(|a| (idx[a] - center[a] as i64).abs() == si);
            for a in 0..d - 1 {
                cell[a] = idx[a] as usize;
            }
            if on_shell {
                for z in llo..=lhi {
                    cell[d - 1] = z as usize;
                    for &q in self.cell_items(&cell) {
                        f(q);
                    }
                }
            } else {
                for z in [clast - si, clast + si] {
                    if z >= 0 && z < self.dims[d - 1] as i64 {
                        cell[d - 1] = z as usize;
                        for &q in self.cell_items(&cell) {
                            f(q);
                        }
                    }
                }
            }
            // advance the odometer over the outer axes
            let mut a = d - 1;
            loop {
                if a == 0 {
                    return true;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] <= outer[a].1 {
                    break;
                }
                idx[a] = outer[a].0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonicalize_edge, ModelParams};

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn shells_partition_the_grid() {
        for d in 1..=3 {
            let w = Window::cube(d, 0.0, 10.0).unwrap();
            let n = 300;
            let coords: Vec<f64> = (0..n * d).map(|i| ((i * 7919) % 1000) as f64 / 100.0).collect();
            let grid = EndpointGrid::new(&w, &coords, d);
            for probe in [0usize, 13, 77] {
                let center = grid.cell_of(&coords[probe * d..(probe + 1) * d]);
                let mut seen = vec![0u32; n];
                let mut s = 0;
                while grid.for_each_in_shell(&center, s, |q| seen[q as usize] += 1) {
                    s += 1;
                }
                assert!(seen.iter().all(|&c| c == 1), "d={d}");
            }
        }
    }

    #[test]
    fn grid_and_dense_agree() {
        let params = ModelParams::new(2, 1.0, 0.5, f64::INFINITY, 0).unwrap();
        let w = Window::cube(2, 0.0, 8.0).unwrap();
        let mut cfg = EdgeConfiguration::empty(params, w.clone());
        let pts = [
            ([0.5, 0.5], [7.0, 1.0]),
            ([7.5, 1.5], [2.0, 7.0]),
            ([3.0, 3.0], [6.0, 6.5]),
            ([1.0, 6.0], [4.0, 1.0]),
        ];
        for (a, b) in pts {
            cfg.edges.push(canonicalize_edge(p(&a), p(&b)).unwrap());
        }
        cfg.sort_edges();
        let x = p(&[0.0, 0.0]);
        let y = p(&[2.5, 7.5]);
        let g = GapGraph::new(&cfg, &w, &[&x, &y]).unwrap();
        let t1 = g.search(0, &[1], Relaxation::Grid);
        let t2 = g.search(0, &[1], Relaxation::Dense);
        assert!((t1.dist[1] - t2.dist[1]).abs() < 1e-12);
        // via edge (0.5,0.5)-(7,1), gap to (7.5,1.5), hop to (2,7), gap to y
        let expect = 0.5f64.hypot(0.5) + 0.5f64.hypot(0.5) + 0.5f64.hypot(0.5);
        assert!((t1.dist[1] - expect).abs() < 1e-12);
        let tr = g.trace(&t1, 1).unwrap();
        assert_eq!(tr.hop_count, 2);
        assert!((tr.length_l1 - expect).abs() < 1e-12);
    }
}
