//! Path counting: self-avoiding lattice paths from the origin, and
//! equivalence classes of proper continuous paths (hop sequences) within a
//! length budget.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{mean, std_error};
use crate::error::{Error, Result};
use crate::metric::LatticeAdjacency;
use crate::model::{EdgeConfiguration, LatticeBox, LatticeGraph, ModelParams, Point, Window};
use crate::rng::derive_stream;
use crate::sampler::{sample_continuous, sample_discrete_with, unit_sphere_area, MassCache};

/// Enumeration guard for both path counters.
pub const MAX_PATHS: u64 = 50_000_000;

/// `sum_{j != 0} p_{0j}` for the lattice model, as an upper bound: the sum
/// over `|j|_∞ <= cutoff` plus a bound on the rest.
pub fn branching_constant(params: &ModelParams, cutoff: i64) -> Result<f64> {
    let d = params.d;
    if cutoff < 2 {
        return Err(Error::InvalidParams("cutoff must be at least 2".into()));
    }
    let cache = MassCache::new(d);
    let lattice_box = LatticeBox::cube(d, -cutoff, cutoff)?;
    let mut sum = 0.0;
    for i in 0..lattice_box.len() {
        let k = lattice_box.point(i);
        if k.iter().all(|&c| c == 0) {
            continue;
        }
        sum += cache.prob(params.beta, &k);
    }
    // Outside the cutoff the cubes are at distance |j|_∞ - 1 >= |j|_∞ / 2,
    // so p <= beta mass <= 2^{2d} beta |j|_∞^{-2d}; the shell at radius r
    // has at most 2d (3r)^{d-1} points, and sum_{r > J} r^{-d-1} <= J^{-d}/d.
    let tail = 2f64.powi(2 * d as i32) * params.beta * 2.0 * d as f64 * 3f64.powi(d as i32 - 1)
        / (d as f64 * (cutoff as f64).powi(d as i32));
    Ok(sum + tail)
}

/// Number of self-avoiding paths from `start` of each length `0..=m_max`.
pub fn count_self_avoiding(adj: &LatticeAdjacency, start: usize, m_max: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; m_max + 1];
    let mut on_path = vec![false; adj.len()];
    let mut total = 0u64;
    fn dfs(
        adj: &LatticeAdjacency,
        v: usize,
        depth: usize,
        m_max: usize,
        on_path: &mut [bool],
        counts: &mut [u64],
        total: &mut u64,
    ) -> Result<()> {
        counts[depth] += 1;
        *total += 1;
        if *total > MAX_PATHS {
            return Err(Error::Resource(format!("more than {MAX_PATHS} paths")));
        }
        if depth == m_max {
            return Ok(());
        }
        on_path[v] = true;
        let mut next = Vec::new();
        adj.for_each_neighbor(v, |w| {
            if !on_path[w] {
                next.push(w);
            }
        });
        for w in next {
            dfs(adj, w, depth + 1, m_max, on_path, counts, total)?;
        }
        on_path[v] = false;
        Ok(())
    }
    dfs(adj, start, 0, m_max, &mut on_path, &mut counts, &mut total)?;
    Ok(counts)
}

/// Reference counter: extends every path of length `k` by every vertex of
/// the box, testing adjacency from the edge list.
pub fn count_self_avoiding_naive(graph: &LatticeGraph, start: &[i64], m_max: usize) -> Vec<u64> {
    let b = &graph.lattice_box;
    let adjacent = |x: usize, y: usize| {
        let (px, py) = (b.point(x), b.point(y));
        let l1: i64 = px.iter().zip(&py).map(|(a, c)| (a - c).abs()).sum();
        l1 == 1 || graph.long_edges.binary_search(&(x.min(y), x.max(y))).is_ok()
    };
    let mut level: Vec<Vec<usize>> = vec![vec![b.index(start).expect("start in box")]];
    let mut counts = vec![1u64];
    for _ in 0..m_max {
        let mut next = Vec::new();
        for path in &level {
            let last = *path.last().unwrap();
            for v in 0..b.len() {
                if !path.contains(&v) && adjacent(last, v) {
                    let mut p = path.clone();
                    p.push(v);
                    next.push(p);
                }
            }
        }
        counts.push(next.len() as u64);
        level = next;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCountReport {
    pub replicates: usize,
    pub half_width: i64,
    pub branching_constant: f64,
    /// Mean number of self-avoiding paths of length exactly `k`.
    pub mean_counts: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Mean of `|P_{<=m}|`.
    pub mean_cumulative: Vec<f64>,
    /// For each `k < m_max`: mean of `|P_{k+1}| - C |P_k|` and its standard
    /// error; the recursion asks for `mean <= 3 se`.
    pub recursion_excess: Vec<(f64, f64)>,
    pub recursion_holds: bool,
}

/// Monte Carlo mean of the self-avoiding path counts from the origin in
/// lattice samples on `[-half_width, half_width]^d`.
pub fn path_count_mc(
    params: &ModelParams,
    m_max: usize,
    replicates: usize,
    half_width: i64,
) -> Result<PathCountReport> {
    if half_width < m_max as i64 {
        return Err(Error::Precondition(format!(
            "box half-width {half_width} cannot hold paths of length {m_max}"
        )));
    }
    if replicates < 2 {
        return Err(Error::InvalidParams("need at least two replicates".into()));
    }
    let d = params.d;
    let c = branching_constant(params, 64)?;
    let lattice_box = LatticeBox::cube(d, -half_width, half_width)?;
    let origin = lattice_box.index(&vec![0; d]).expect("origin in box");
    let cache = MassCache::new(d);
    let counts: Vec<Vec<u64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let stream = derive_stream(params.seed, &format!("paths/replicate/{r}"));
            let g = sample_discrete_with(params, &lattice_box, &stream, &cache)?;
            count_self_avoiding(&LatticeAdjacency::new(&g), origin, m_max)
        })
        .collect::<Result<_>>()?;
    let col = |k: usize| -> Vec<f64> { counts.iter().map(|row| row[k] as f64).collect() };
    let mean_counts: Vec<f64> = (0..=m_max).map(|k| mean(&col(k))).collect();
    let std_errors: Vec<f64> = (0..=m_max).map(|k| std_error(&col(k))).collect();
    let mean_cumulative = mean_counts
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let recursion_excess: Vec<(f64, f64)> = (0..m_max)
        .map(|k| {
            let diff: Vec<f64> = counts
                .iter()
                .map(|row| row[k + 1] as f64 - c * row[k] as f64)
                .collect();
            (mean(&diff), std_error(&diff))
        })
        .collect();
    let recursion_holds = recursion_excess.iter().all(|(m, se)| *m <= 3.0 * se);
    Ok(PathCountReport {
        replicates,
        half_width,
        branching_constant: c,
        mean_counts,
        std_errors,
        mean_cumulative,
        recursion_excess,
        recursion_holds,
    })
}

/// `c_d = sigma_{d-1}^2 / d`, so that `{(x, y): |x| <= t, |x - y| >= 1}` has
/// measure `c_d ∫_0^t r^{d-1} dr` under `|x - y|^{-2d}`.
pub fn hop_constant(d: usize) -> f64 {
    unit_sphere_area(d).powi(2) / d as f64
}

/// `(beta c_d (d-1)!)^{1/d}`.
pub fn c_hat(params: &ModelParams) -> f64 {
    let d = params.d;
    let fact: f64 = (1..d).map(|i| i as f64).product();
    (params.beta * hop_constant(d) * fact).powf(1.0 / d as f64)
}

/// Counts equivalence classes of proper paths from `start` with length at
/// most `budget`, grouped by number of hops: `counts[k]` classes use `k`
/// hops. A class is a sequence of distinct, oriented edges `(u_i -> v_i)`
/// with `|start - u_1| + sum |v_i - u_{i+1}| <= budget`.
pub fn count_hop_classes(config: &EdgeConfiguration, start: &Point, budget: f64) -> Result<Vec<u64>> {
    // Oriented edges sorted by the first coordinate of their entry point: a
    // gap of length at most `b` from `pos` can only reach entries whose first
    // coordinate is within `b` of `pos`.
    let mut ends: Vec<(&Point, &Point, usize)> = config
        .edges
        .iter()
        .enumerate()
        .flat_map(|(i, e)| [(&e.a, &e.b, i), (&e.b, &e.a, i)])
        .collect();
    ends.sort_by(|x, y| x.0.coords()[0].total_cmp(&y.0.coords()[0]));
    let keys: Vec<f64> = ends.iter().map(|e| e.0.coords()[0]).collect();
    let mut counts = vec![0u64];
    let mut used = vec![false; config.edges.len()];
    let mut total = 0u64;
    struct Search<'a> {
        ends: &'a [(&'a Point, &'a Point, usize)],
        keys: &'a [f64],
        used: &'a mut [bool],
        counts: &'a mut Vec<u64>,
        total: &'a mut u64,
    }
    fn dfs(s: &mut Search, pos: &Point, budget: f64, depth: usize) -> Result<()> {
        if s.counts.len() <= depth {
            s.counts.push(0);
        }
        s.counts[depth] += 1;
        *s.total += 1;
        if *s.total > MAX_PATHS {
            return Err(Error::Resource(format!("more than {MAX_PATHS} path classes")));
        }
        let x = pos.coords()[0];
        let lo = s.keys.partition_point(|&k| k < x - budget);
        let hi = s.keys.partition_point(|&k| k <= x + budget);
        for i in lo..hi {
            let (u, v, e) = s.ends[i];
            if s.used[e] {
                continue;
            }
            let gap = pos.dist(u);
            if gap <= budget {
                s.used[e] = true;
                dfs(s, v, budget - gap, depth + 1)?;
                s.used[e] = false;
            }
        }
        Ok(())
    }
    let mut search = Search {
        ends: &ends,
        keys: &keys,
        used: &mut used,
        counts: &mut counts,
        total: &mut total,
    };
    dfs(&mut search, start, budget, 0)?;
    Ok(counts)
}

/// Reference counter: builds hop sequences level by level and recomputes
/// each candidate's full length from scratch.
pub fn count_hop_classes_naive(config: &EdgeConfiguration, start: &Point, budget: f64) -> Vec<u64> {
    let m = config.edges.len();
    let length = |seq: &[(usize, bool)]| -> f64 {
        let mut pos = start.clone();
        let mut len = 0.0;
        for &(e, flip) in seq {
            let edge = &config.edges[e];
            let (u, v) = if flip { (&edge.b, &edge.a) } else { (&edge.a, &edge.b) };
            len += pos.dist(u);
            pos = v.clone();
        }
        len
    };
    let mut level: Vec<Vec<(usize, bool)>> = vec![Vec::new()];
    let mut counts = vec![1u64];
    loop {
        let mut next = Vec::new();
        for seq in &level {
            for e in 0..m {
                if seq.iter().any(|s| s.0 == e) {
                    continue;
                }
                for flip in [false, true] {
                    let mut s = seq.clone();
                    s.push((e, flip));
                    if length(&s) <= budget {
                        next.push(s);
                    }
                }
            }
        }
        if next.is_empty() {
            return counts;
        }
        counts.push(next.len() as u64);
        level = next;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopCountReport {
    pub t: f64,
    pub replicates: usize,
    pub c_hat: f64,
    /// Mean of `|P_t|`, its standard error, and the bound `e^{c_hat t}`.
    pub mean_classes: f64,
    pub std_error: f64,
    pub class_bound: f64,
    /// Mean number of classes with exactly `k` hops, next to
    /// `(c_hat t)^{kd} / (kd)!`.
    pub by_hops: Vec<(f64, f64)>,
    /// `(alpha, empirical P[some class has >= alpha t hops], bound)` with the
    /// bound `sum_{k >= alpha t} (c_hat t)^{kd} / (kd)!`.
    pub hop_tail: Vec<(f64, f64, f64)>,
    pub bound_holds: bool,
}

/// Enumerates path classes from the origin in continuous samples with
/// scope range `[1, ∞)` on `[-half_width, half_width]^d`.
pub fn hop_count_mc(
    params: &ModelParams,
    t: f64,
    replicates: usize,
    half_width: f64,
    alphas: &[f64],
) -> Result<HopCountReport> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!("t must be nonnegative, got {t}")));
    }
    if replicates < 2 {
        return Err(Error::InvalidParams("need at least two replicates".into()));
    }
    let d = params.d;
    let unit = ModelParams::new(d, params.beta, 1.0, f64::INFINITY, params.seed)?;
    let window = Window::cube(d, -half_width, half_width)?;
    let origin = Point::zeros(d);
    let per: Vec<Vec<u64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let stream = derive_stream(params.seed, &format!("hops/replicate/{r}"));
            let cfg = sample_continuous(&unit, &window, &stream)?;
            count_hop_classes(&cfg, &origin, t)
        })
        .collect::<Result<_>>()?;
    let ch = c_hat(&unit);
    let totals: Vec<f64> = per.iter().map(|c| c.iter().sum::<u64>() as f64).collect();
    let kmax = per.iter().map(|c| c.len()).max().unwrap_or(1);
    let term = |k: usize| -> f64 {
        let kd = (k * d) as i32;
        let log = kd as f64 * (ch * t).ln() - ln_factorial((k * d) as u64);
        if k == 0 {
            1.0
        } else {
            log.exp()
        }
    };
    let by_hops = (0..kmax)
        .map(|k| {
            let m = mean(&per.iter().map(|c| *c.get(k).unwrap_or(&0) as f64).collect::<Vec<_>>());
            (m, term(k))
        })
        .collect();
    let hop_tail = alphas
        .iter()
        .map(|&alpha| {
            let k0 = (alpha * t).ceil().max(0.0) as usize;
            let hit = per.iter().filter(|c| c.len() > k0 && c[k0..].iter().any(|&v| v > 0)).count();
            let bound: f64 = (k0..k0 + 200).map(term).sum();
            (alpha, hit as f64 / replicates as f64, bound)
        })
        .collect();
    let mean_classes = mean(&totals);
    let se = std_error(&totals);
    let class_bound = (ch * t).exp();
    Ok(HopCountReport {
        t,
        replicates,
        c_hat: ch,
        mean_classes,
        std_error: se,
        class_bound,
        by_hops,
        hop_tail,
        bound_holds: mean_classes <= class_bound + 3.0 * se,
    })
}

fn ln_factorial(n: u64) -> f64 {
    statrs::function::factorial::ln_factorial(n)
}
