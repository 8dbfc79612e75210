//! Domain types shared by the samplers, the metric engine and the estimators.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serializes `f64::INFINITY` as the string `"inf"`; JSON has no infinity.
mod maybe_infinite {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Tag(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            Repr::Tag("inf".into()).serialize(s)
        } else {
            Repr::Finite(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Finite(v) => Ok(v),
            Repr::Tag(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!("bad real {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub beta: f64,
    pub delta_min: f64,
    #[serde(with = "maybe_infinite")]
    pub delta_max: f64,
    pub seed: u64,
}

impl ModelParams {
    pub fn new(d: usize, beta: f64, delta_min: f64, delta_max: f64, seed: u64) -> Result<Self> {
        let p = ModelParams {
            d,
            beta,
            delta_min,
            delta_max,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters for the lattice model, where the scope window is unused.
    pub fn discrete(d: usize, beta: f64, seed: u64) -> Result<Self> {
        Self::new(d, beta, 1.0, f64::INFINITY, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidParams(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if !(self.delta_min.is_finite() && self.delta_min > 0.0) {
            return Err(Error::InvalidParams(format!(
                "delta must be positive, got {}",
                self.delta_min
            )));
        }
        if self.delta_max.is_nan() || self.delta_max <= self.delta_min {
            return Err(Error::InvalidParams(format!(
                "delta-max {} must exceed delta {}",
                self.delta_max, self.delta_min
            )));
        }
        Ok(())
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        ModelParams { beta, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParams("point needs at least one coordinate".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite coordinate {c}")));
        }
        Ok(Point(coords))
    }

    /// Unchecked constructor for coordinates produced internally.
    pub(crate) fn from_vec(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Point(coords)
    }

    pub fn from_ints(coords: &[i64]) -> Self {
        Point(coords.iter().map(|&c| c as f64).collect())
    }

    pub fn zeros(d: usize) -> Self {
        Point(vec![0.0; d])
    }

    pub fn splat(d: usize, v: f64) -> Self {
        Point(vec![v; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dist(&self, other: &Point) -> f64 {
        euclid(&self.0, &other.0)
    }

    pub fn scaled(&self, r: f64) -> Point {
        Point(self.0.iter().map(|c| c * r).collect())
    }

    pub fn lex_cmp(&self, other: &Point) -> Ordering {
        lex_cmp(&self.0, &other.0)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Closed axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Point,
    pub hi: Point,
}

impl Window {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch {
                expected: lo.dim(),
                got: hi.dim(),
            });
        }
        for k in 0..lo.dim() {
            if lo.0[k] >= hi.0[k] {
                return Err(Error::InvalidParams(format!(
                    "window axis {k}: lo {} must be below hi {}",
                    lo.0[k], hi.0[k]
                )));
            }
        }
        Ok(Window { lo, hi })
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Window::new(Point::new(vec![lo; d])?, Point::new(vec![hi; d])?)
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi.0[axis] - self.lo.0[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.side(k)).product()
    }

    pub fn diameter(&self) -> f64 {
        euclid(&self.lo.0, &self.hi.0)
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.contains_coords(p.coords())
    }

    pub fn contains_coords(&self, c: &[f64]) -> bool {
        c.len() == self.dim()
            && c
                .iter()
                .enumerate()
                .all(|(k, &x)| x >= self.lo.0[k] && x <= self.hi.0[k])
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn center(&self) -> Point {
        Point(
            (0..self.dim())
                .map(|k| 0.5 * (self.lo.0[k] + self.hi.0[k]))
                .collect(),
        )
    }

    pub fn scaled(&self, r: f64) -> Window {
        Window {
            lo: self.lo.scaled(r),
            hi: self.hi.scaled(r),
        }
    }

    /// The concentric box whose sides are `fraction` of this one.
    pub fn shrunk(&self, fraction: f64) -> Window {
        let c = self.center();
        let lo = (0..self.dim())
            .map(|k| c.0[k] - 0.5 * fraction * self.side(k))
            .collect();
        let hi = (0..self.dim())
            .map(|k| c.0[k] + 0.5 * fraction * self.side(k))
            .collect();
        Window {
            lo: Point(lo),
            hi: Point(hi),
        }
    }
}

/// An unordered long edge stored with `a` lexicographically before `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongEdge {
    pub a: Point,
    pub b: Point,
}

impl LongEdge {
    pub fn canonical(a: Point, b: Point) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        match a.lex_cmp(&b) {
            Ordering::Less => Ok(LongEdge { a, b }),
            Ordering::Greater => Ok(LongEdge { a: b, b: a }),
            Ordering::Equal => Err(Error::DegenerateEdge(a.to_string())),
        }
    }

    pub fn scope(&self) -> f64 {
        self.a.dist(&self.b)
    }

    pub fn scaled(&self, r: f64) -> LongEdge {
        LongEdge {
            a: self.a.scaled(r),
            b: self.b.scaled(r),
        }
    }

    pub(crate) fn cmp_canonical(&self, other: &LongEdge) -> Ordering {
        self.a.lex_cmp(&other.a).then_with(|| self.b.lex_cmp(&other.b))
    }
}

/// Orders the endpoints of a candidate edge lexicographically.
pub fn canonicalize_edge(a: Point, b: Point) -> Result<LongEdge> {
    LongEdge::canonical(a, b)
}

/// A realized sample of the continuous model inside a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeConfiguration {
    pub params: ModelParams,
    pub window: Window,
    pub edges: Vec<LongEdge>,
    pub seed_trace: Vec<String>,
}

impl EdgeConfiguration {
    pub fn empty(params: ModelParams, window: Window) -> Self {
        EdgeConfiguration {
            params,
            window,
            edges: Vec::new(),
            seed_trace: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    /// Checks endpoint containment, the scope range and that no endpoint is
    /// shared between two edges.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let d = self.window.dim();
        if self.params.d != d {
            return Err(Error::DimensionMismatch {
                expected: self.params.d,
                got: d,
            });
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.a.dim() != d || e.b.dim() != d {
                return Err(Error::InvalidConfiguration(format!(
                    "edge {i} has wrong dimension"
                )));
            }
            if e.a.lex_cmp(&e.b) != Ordering::Less {
                return Err(Error::InvalidConfiguration(format!(
                    "edge {i} is not canonical"
                )));
            }
            if !self.window.contains(&e.a) || !self.window.contains(&e.b) {
                return Err(Error::InvalidConfiguration(format!(
                    "edge {i} leaves the window"
                )));
            }
            let s = e.scope();
            if s < self.params.delta_min || s >= self.params.delta_max {
                return Err(Error::InvalidConfiguration(format!(
                    "edge {i} scope {s} outside [{}, {})",
                    self.params.delta_min, self.params.delta_max
                )));
            }
        }
        let mut ends: Vec<&[f64]> = self
            .edges
            .iter()
            .flat_map(|e| [e.a.coords(), e.b.coords()])
            .collect();
        ends.sort_by(|x, y| lex_cmp(x, y));
        if ends.windows(2).any(|w| lex_cmp(w[0], w[1]) == Ordering::Equal) {
            return Err(Error::InvalidConfiguration(
                "two edges share an endpoint".into(),
            ));
        }
        Ok(())
    }

    pub fn sort_edges(&mut self) {
        self.edges.sort_by(|x, y| x.cmp_canonical(y));
    }

    /// Keeps only edges with both endpoints in `sub`.
    pub fn restricted_to(&self, sub: &Window) -> EdgeConfiguration {
        EdgeConfiguration {
            params: self.params.clone(),
            window: sub.clone(),
            edges: self
                .edges
                .iter()
                .filter(|e| sub.contains(&e.a) && sub.contains(&e.b))
                .cloned()
                .collect(),
            seed_trace: self.seed_trace.clone(),
        }
    }

    /// Keeps only edges with scope in `[lo, hi)`.
    pub fn restricted_scope(&self, lo: f64, hi: f64) -> Result<EdgeConfiguration> {
        let params = ModelParams {
            delta_min: lo.max(self.params.delta_min),
            delta_max: hi.min(self.params.delta_max),
            ..self.params.clone()
        };
        params.validate()?;
        Ok(EdgeConfiguration {
            edges: self
                .edges
                .iter()
                .filter(|e| {
                    let s = e.scope();
                    s >= params.delta_min && s < params.delta_max
                })
                .cloned()
                .collect(),
            params,
            window: self.window.clone(),
            seed_trace: self.seed_trace.clone(),
        })
    }

    /// Multiplies every coordinate and the scope window by `r`.
    pub fn scaled(&self, r: f64) -> EdgeConfiguration {
        EdgeConfiguration {
            params: ModelParams {
                delta_min: self.params.delta_min * r,
                delta_max: self.params.delta_max * r,
                ..self.params.clone()
            },
            window: self.window.scaled(r),
            edges: self.edges.iter().map(|e| e.scaled(r)).collect(),
            seed_trace: self.seed_trace.clone(),
        }
    }
}

/// Inclusive integer box `[lo, hi]` in `Z^d`. Vertices are numbered in
/// row-major order with the first axis most significant, so the numbering
/// agrees with lexicographic order of the coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl LatticeBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidParams("box bounds must have equal, nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::InvalidParams(format!("empty box {lo:?}..{hi:?}")));
        }
        Ok(LatticeBox { lo, hi })
    }

    pub fn cube(d: usize, lo: i64, hi: i64) -> Result<Self> {
        LatticeBox::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn extent(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn len(&self) -> usize {
        (0..self.dim()).map(|k| self.extent(k)).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .enumerate()
                .all(|(k, &x)| x >= self.lo[k] && x <= self.hi[k])
    }

    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn index(&self, p: &[i64]) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let mut idx = 0usize;
        for (k, &x) in p.iter().enumerate() {
            idx = idx * self.extent(k) + (x - self.lo[k]) as usize;
        }
        Some(idx)
    }

    pub fn point(&self, mut idx: usize) -> Vec<i64> {
        let d = self.dim();
        let mut p = vec![0i64; d];
        for k in (0..d).rev() {
            let e = self.extent(k);
            p[k] = self.lo[k] + (idx % e) as i64;
            idx /= e;
        }
        p
    }

    /// Index strides: moving one step along `axis` changes the index by `strides[axis]`.
    pub fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut s = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.extent(k + 1);
        }
        s
    }
}

pub(crate) fn l1_i(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// A realized sample of the lattice model. Nearest-neighbour edges are
/// implicit; `long_edges` holds vertex-index pairs `(a, b)` with `a < b`,
/// sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeGraph {
    pub lattice_box: LatticeBox,
    pub long_edges: Vec<(usize, usize)>,
    pub params: ModelParams,
}

impl LatticeGraph {
    /// Builds a graph from point pairs, canonicalizing and deduplicating.
    pub fn from_point_pairs(
        lattice_box: LatticeBox,
        pairs: &[(Vec<i64>, Vec<i64>)],
        params: ModelParams,
    ) -> Result<Self> {
        let mut edges = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let ia = lattice_box
                .index(a)
                .ok_or_else(|| Error::OutOfDomain(format!("{a:?}")))?;
            let ib = lattice_box
                .index(b)
                .ok_or_else(|| Error::OutOfDomain(format!("{b:?}")))?;
            if l1_i(a, b) <= 1 {
                return Err(Error::InvalidConfiguration(format!(
                    "{a:?}-{b:?} is not a long edge"
                )));
            }
            edges.push((ia.min(ib), ia.max(ib)));
        }
        Self::from_index_pairs(lattice_box, edges, params)
    }

    pub fn from_index_pairs(
        lattice_box: LatticeBox,
        mut edges: Vec<(usize, usize)>,
        params: ModelParams,
    ) -> Result<Self> {
        let n = lattice_box.len();
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
            if e.1 >= n {
                return Err(Error::OutOfDomain(format!("vertex index {}", e.1)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let g = LatticeGraph {
            lattice_box,
            long_edges: edges,
            params,
        };
        for &(a, b) in &g.long_edges {
            if l1_i(&g.lattice_box.point(a), &g.lattice_box.point(b)) <= 1 {
                return Err(Error::InvalidConfiguration(format!(
                    "vertices {a} and {b} are not a long edge"
                )));
            }
        }
        Ok(g)
    }

    pub fn without_long_edges(lattice_box: LatticeBox, params: ModelParams) -> Self {
        LatticeGraph {
            lattice_box,
            long_edges: Vec::new(),
            params,
        }
    }

    pub fn has_long_edge(&self, a: &[i64], b: &[i64]) -> bool {
        match (self.lattice_box.index(a), self.lattice_box.index(b)) {
            (Some(x), Some(y)) => self
                .long_edges
                .binary_search(&(x.min(y), x.max(y)))
                .is_ok(),
            _ => false,
        }
    }

    pub fn edge_points(&self) -> impl Iterator<Item = (Vec<i64>, Vec<i64>)> + '_ {
        self.long_edges
            .iter()
            .map(|&(a, b)| (self.lattice_box.point(a), self.lattice_box.point(b)))
    }

    /// Union of two samples on the same box (edge set union).
    pub fn union(&self, other: &LatticeGraph, params: ModelParams) -> Result<LatticeGraph> {
        if self.lattice_box != other.lattice_box {
            return Err(Error::Precondition("union of graphs on different boxes".into()));
        }
        let mut edges = Vec::with_capacity(self.long_edges.len() + other.long_edges.len());
        edges.extend_from_slice(&self.long_edges);
        edges.extend_from_slice(&other.long_edges);
        edges.sort_unstable();
        edges.dedup();
        Ok(LatticeGraph {
            lattice_box: self.lattice_box.clone(),
            long_edges: edges,
            params,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceKind {
    /// Continuous-metric path: must alternate hops and gaps.
    Proper,
    /// Stepwise path (lattice walks and their continuous realizations):
    /// consecutive gaps are allowed.
    Stepwise,
}

/// A path `z_0 -> ... -> z_m` whose segments are gaps (Euclidean, cost = length)
/// or hops (long edges, cost 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTrace {
    pub nodes: Vec<Point>,
    pub hop_flags: Vec<bool>,
    pub length_l1: f64,
    pub hop_count: usize,
    pub kind: TraceKind,
}

impl PathTrace {
    pub fn new(nodes: Vec<Point>, hop_flags: Vec<bool>, kind: TraceKind) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::MalformedTrace("empty trace".into()));
        }
        if hop_flags.len() + 1 != nodes.len() {
            return Err(Error::MalformedTrace(format!(
                "{} nodes need {} segment flags, got {}",
                nodes.len(),
                nodes.len() - 1,
                hop_flags.len()
            )));
        }
        let d = nodes[0].dim();
        if nodes.iter().any(|p| p.dim() != d) {
            return Err(Error::MalformedTrace("mixed dimensions".into()));
        }
        let (length_l1, hop_count) = segment_totals(&nodes, &hop_flags);
        Ok(PathTrace {
            nodes,
            hop_flags,
            length_l1,
            hop_count,
            kind,
        })
    }

    pub fn point(p: Point) -> Self {
        PathTrace {
            nodes: vec![p],
            hop_flags: Vec::new(),
            length_l1: 0.0,
            hop_count: 0,
            kind: TraceKind::Proper,
        }
    }

    pub fn start(&self) -> &Point {
        &self.nodes[0]
    }

    pub fn end(&self) -> &Point {
        self.nodes.last().expect("trace is nonempty")
    }

    pub fn segments(&self) -> impl Iterator<Item = (&Point, &Point, bool)> + '_ {
        self.nodes
            .windows(2)
            .zip(&self.hop_flags)
            .map(|(w, &h)| (&w[0], &w[1], h))
    }

    /// Number of non-hop segments (lattice steps for lattice traces).
    pub fn gap_count(&self) -> usize {
        self.hop_flags.iter().filter(|h| !**h).count()
    }
}

pub(crate) fn segment_totals(nodes: &[Point], flags: &[bool]) -> (f64, usize) {
    let mut len = 0.0;
    let mut hops = 0;
    for (w, &h) in nodes.windows(2).zip(flags) {
        if h {
            hops += 1;
        } else {
            len += w[0].dist(&w[1]);
        }
    }
    (len, hops)
}
