//! Chemical distance on lattice samples: every edge, nearest-neighbour or
//! long, has weight 1, and paths stay inside the sampled box.

use std::collections::VecDeque;

use super::{DistanceField, DistanceResult, FieldDomain};
use crate::error::{Error, Result};
use crate::model::{l1_i, LatticeBox, LatticeGraph, PathTrace, Point, TraceKind};

const UNSEEN: u32 = u32::MAX;

/// Compressed adjacency of the long edges plus implicit nearest neighbours.
#[derive(Debug, Clone)]
pub struct LatticeAdjacency {
    lattice_box: LatticeBox,
    strides: Vec<usize>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl LatticeAdjacency {
    pub fn new(graph: &LatticeGraph) -> Self {
        let n = graph.lattice_box.len();
        let mut degree = vec![0usize; n + 1];
        for &(a, b) in &graph.long_edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; offsets[n]];
        for &(a, b) in &graph.long_edges {
            targets[fill[a]] = b as u32;
            fill[a] += 1;
            targets[fill[b]] = a as u32;
            fill[b] += 1;
        }
        for v in 0..n {
            targets[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        LatticeAdjacency {
            strides: graph.lattice_box.strides(),
            lattice_box: graph.lattice_box.clone(),
            offsets,
            targets,
        }
    }

    pub fn lattice_box(&self) -> &LatticeBox {
        &self.lattice_box
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Calls `f` on every neighbour of `v` (nearest neighbours first).
    #[inline]
    pub fn for_each_neighbor(&self, v: usize, mut f: impl FnMut(usize)) {
        let d = self.strides.len();
        let mut rem = v;
        // Recover coordinates relative to `lo`, last axis fastest.
        let mut rel = [0usize; 8];
        let mut rel_vec;
        let rel: &mut [usize] = if d <= 8 {
            &mut rel[..d]
        } else {
            rel_vec = vec![0usize; d];
            &mut rel_vec
        };
        for a in (0..d).rev() {
            let e = self.lattice_box.extent(a);
            rel[a] = rem % e;
            rem /= e;
        }
        for a in 0..d {
            if rel[a] > 0 {
                f(v - self.strides[a]);
            }
            if rel[a] + 1 < self.lattice_box.extent(a) {
                f(v + self.strides[a]);
            }
        }
        for &w in &self.targets[self.offsets[v]..self.offsets[v + 1]] {
            f(w as usize);
        }
    }

    /// BFS distances from `source` to every vertex.
    pub fn bfs(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![UNSEEN; self.len()];
        self.bfs_into(source, &mut dist, |_, _| true);
        dist
    }

    /// BFS that stops once `keep_going(vertex, distance)` returns false for a
    /// newly discovered vertex. `dist` must be all `UNSEEN`.
    fn bfs_into(
        &self,
        source: usize,
        dist: &mut [u32],
        mut keep_going: impl FnMut(usize, u32) -> bool,
    ) {
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        if !keep_going(source, 0) {
            return;
        }
        while let Some(v) = queue.pop_front() {
            let next = dist[v] + 1;
            let mut stop = false;
            self.for_each_neighbor(v, |w| {
                if !stop && dist[w] == UNSEEN {
                    dist[w] = next;
                    queue.push_back(w);
                    if !keep_going(w, next) {
                        stop = true;
                    }
                }
            });
            if stop {
                return;
            }
        }
    }

    fn index_of(&self, p: &[i64]) -> Result<usize> {
        self.lattice_box
            .index(p)
            .ok_or_else(|| Error::OutOfDomain(format!("{p:?}")))
    }

    /// Chemical distance between two box vertices.
    pub fn distance(&self, u: &[i64], v: &[i64]) -> Result<u32> {
        let (iu, iv) = (self.index_of(u)?, self.index_of(v)?);
        let mut dist = vec![UNSEEN; self.len()];
        self.bfs_into(iu, &mut dist, |w, _| w != iv);
        Ok(dist[iv])
    }

    /// Shortest path from `u` to `v`. Walking back from `v`, each step picks
    /// the smallest-index predecessor one level closer to `u`.
    pub fn geodesic(&self, u: &[i64], v: &[i64]) -> Result<DistanceResult> {
        let (iu, iv) = (self.index_of(u)?, self.index_of(v)?);
        let mut dist = vec![UNSEEN; self.len()];
        self.bfs_into(iu, &mut dist, |w, _| w != iv);
        let mut rev = vec![iv];
        let mut cur = iv;
        while cur != iu {
            let want = dist[cur] - 1;
            let mut best = usize::MAX;
            self.for_each_neighbor(cur, |w| {
                if dist[w] == want && w < best {
                    best = w;
                }
            });
            debug_assert!(best != usize::MAX);
            rev.push(best);
            cur = best;
        }
        rev.reverse();
        let pts: Vec<Vec<i64>> = rev.iter().map(|&i| self.lattice_box.point(i)).collect();
        let flags = pts.windows(2).map(|w| l1_i(&w[0], &w[1]) > 1).collect();
        let nodes = pts.iter().map(|p| Point::from_ints(p)).collect();
        let trace = PathTrace::new(nodes, flags, TraceKind::Stepwise)?;
        Ok(DistanceResult {
            value: dist[iv] as f64,
            trace,
        })
    }

    /// Diameter of `sub` under the chemical distance of the whole sample,
    /// i.e. the largest distance between two vertices of `sub`.
    pub fn diameter(&self, sub: &LatticeBox) -> Result<u32> {
        Ok(self.nested_diameters(std::slice::from_ref(sub))?[0])
    }

    /// Diameters of several sub-boxes, computed with one BFS per source of
    /// their union.
    pub fn nested_diameters(&self, subs: &[LatticeBox]) -> Result<Vec<u32>> {
        if subs.is_empty() {
            return Ok(Vec::new());
        }
        for s in subs {
            if !self.lattice_box.contains_box(s) {
                return Err(Error::OutOfDomain(format!("sub-box {:?}..{:?}", s.lo, s.hi)));
            }
        }
        let d = self.lattice_box.dim();
        let hull = LatticeBox::new(
            (0..d).map(|a| subs.iter().map(|s| s.lo[a]).min().unwrap()).collect(),
            (0..d).map(|a| subs.iter().map(|s| s.hi[a]).max().unwrap()).collect(),
        )?;
        let mut in_sub = vec![vec![false; self.len()]; subs.len()];
        let mut in_hull = vec![false; self.len()];
        for i in 0..self.len() {
            let p = self.lattice_box.point(i);
            in_hull[i] = hull.contains(&p);
            for (k, s) in subs.iter().enumerate() {
                in_sub[k][i] = s.contains(&p);
            }
        }
        let hull_total = hull.len();
        let mut diam = vec![0u32; subs.len()];
        let mut dist = vec![UNSEEN; self.len()];
        let mut touched: Vec<usize> = Vec::new();
        for hs in 0..hull_total {
            let source = self.index_of(&hull.point(hs))?;
            let member: Vec<usize> = (0..subs.len()).filter(|&k| in_sub[k][source]).collect();
            if member.is_empty() {
                continue;
            }
            let mut seen_in_hull = 0usize;
            let mut ecc = vec![0u32; subs.len()];
            touched.clear();
            self.bfs_into(source, &mut dist, |w, dw| {
                touched.push(w);
                for &k in &member {
                    if in_sub[k][w] {
                        ecc[k] = ecc[k].max(dw);
                    }
                }
                if in_hull[w] {
                    seen_in_hull += 1;
                }
                seen_in_hull < hull_total
            });
            for &k in &member {
                diam[k] = diam[k].max(ecc[k]);
            }
            for &w in &touched {
                dist[w] = UNSEEN;
            }
        }
        Ok(diam)
    }
}

pub fn bfs_distance(graph: &LatticeGraph, source: &[i64]) -> Result<DistanceField> {
    let adj = LatticeAdjacency::new(graph);
    let s = adj.index_of(source)?;
    let dist = adj.bfs(s);
    Ok(DistanceField {
        domain: FieldDomain::Lattice(graph.lattice_box.clone()),
        values: dist.into_iter().map(|v| v as f64).collect(),
        source: Point::from_ints(source),
    })
}

pub fn bfs_geodesic(graph: &LatticeGraph, u: &[i64], v: &[i64]) -> Result<DistanceResult> {
    LatticeAdjacency::new(graph).geodesic(u, v)
}
