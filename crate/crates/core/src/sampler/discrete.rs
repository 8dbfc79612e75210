//! Lattice model sampler.
//!
//! Each unordered pair `{i, j}` is visited once, through the offset
//! `k = j - i` that is lexicographically positive. Offsets are grouped into
//! dyadic shells `2^s <= |k|_inf < 2^{s+1}`; inside a shell every candidate is
//! first hit with the dominating probability
//! `p̄_s = 1 - exp(-beta (2^s - 1)^{-2d})` using geometric jumps, then kept
//! with probability `p(k) / p̄_s`. Because `|u - v| >= |k|_inf - 1` on the two
//! cubes, `mass(k) <= (|k|_inf - 1)^{-2d}`, so the thinning is exact.

use rayon::prelude::*;

use super::mass::MassCache;
use crate::error::{Error, Result};
use crate::model::{l1_i, LatticeBox, LatticeGraph, ModelParams};
use crate::rng::Stream;

const BLOCK: usize = 1 << 14;

/// Upper bound on box size accepted by the sampler.
pub const MAX_VERTICES: usize = 1 << 27;

pub fn sample_discrete(
    params: &ModelParams,
    lattice_box: &LatticeBox,
    stream: &Stream,
) -> Result<LatticeGraph> {
    let cache = MassCache::new(params.d);
    sample_discrete_with(params, lattice_box, stream, &cache)
}

/// As [`sample_discrete`], reusing a mass cache across samples.
pub fn sample_discrete_with(
    params: &ModelParams,
    lattice_box: &LatticeBox,
    stream: &Stream,
    cache: &MassCache,
) -> Result<LatticeGraph> {
    params.validate()?;
    check_box(params, lattice_box)?;
    if cache.dim() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            got: cache.dim(),
        });
    }
    let n = lattice_box.len();
    let plan = ShellPlan::new(params, lattice_box);
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<Vec<(usize, usize)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.split(&format!("block/{b}"));
            let mut out = Vec::new();
            let end = ((b + 1) * BLOCK).min(n);
            for i in b * BLOCK..end {
                plan.vertex_edges(i, &mut rng, cache, &mut out);
            }
            out
        })
        .collect();
    let edges = parts.concat();
    LatticeGraph::from_index_pairs(lattice_box.clone(), edges, params.clone())
}

fn check_box(params: &ModelParams, lattice_box: &LatticeBox) -> Result<()> {
    if lattice_box.dim() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            got: lattice_box.dim(),
        });
    }
    let mut n: usize = 1;
    for k in 0..lattice_box.dim() {
        n = n
            .checked_mul(lattice_box.extent(k))
            .filter(|&n| n <= MAX_VERTICES)
            .ok_or_else(|| {
                Error::Resource(format!("box exceeds {MAX_VERTICES} vertices"))
            })?;
    }
    Ok(())
}

struct Shell {
    inner: i64,
    half: i64,
    side: usize,
    positions: usize,
    /// `-ln(1 - p̄)`, i.e. `beta * (inner - 1)^{-2d}`.
    rate: f64,
    p_bar: f64,
}

struct ShellPlan<'a> {
    beta: f64,
    d: usize,
    lattice_box: &'a LatticeBox,
    strides: Vec<usize>,
    touching: Vec<Vec<i64>>,
    shells: Vec<Shell>,
}

impl<'a> ShellPlan<'a> {
    fn new(params: &ModelParams, lattice_box: &'a LatticeBox) -> Self {
        let d = params.d;
        let max_extent = (0..d).map(|k| lattice_box.extent(k)).max().unwrap_or(1) as i64;
        let mut touching = Vec::new();
        if d >= 2 {
            for_each_in_cube(d, 1, |k| {
                if lex_positive(k) && l1(k) > 1 {
                    touching.push(k.to_vec());
                }
            });
        }
        let mut shells = Vec::new();
        let mut s = 1u32;
        loop {
            let inner = 1i64 << s;
            if inner > max_extent - 1 {
                break;
            }
            let half = (1i64 << (s + 1)) - 1;
            let side = (2 * half + 1) as usize;
            let rate = params.beta * ((inner - 1) as f64).powi(-2 * d as i32);
            shells.push(Shell {
                inner,
                half,
                side,
                positions: side.pow(d as u32),
                rate,
                p_bar: -(-rate).exp_m1(),
            });
            s += 1;
        }
        ShellPlan {
            beta: params.beta,
            d,
            lattice_box,
            strides: lattice_box.strides(),
            touching,
            shells,
        }
    }

    fn vertex_edges(
        &self,
        i: usize,
        rng: &mut Stream,
        cache: &MassCache,
        out: &mut Vec<(usize, usize)>,
    ) {
        let p = self.lattice_box.point(i);
        let mut q = vec![0i64; self.d];
        for k in &self.touching {
            if let Some(j) = self.shifted(i, &p, k, &mut q) {
                out.push((i, j));
            }
        }
        let mut k = vec![0i64; self.d];
        for shell in &self.shells {
            let mut pos: usize = 0;
            let mut first = true;
            loop {
                let u = rng.open01();
                let skip = (-u.ln() / shell.rate).floor();
                if !skip.is_finite() || skip >= (shell.positions as f64) {
                    break;
                }
                pos = if first { skip as usize } else { pos + 1 + skip as usize };
                first = false;
                if pos >= shell.positions {
                    break;
                }
                decode(pos, shell.side, shell.half, &mut k);
                let linf = k.iter().map(|c| c.abs()).max().unwrap_or(0);
                if linf < shell.inner || !lex_positive(&k) {
                    continue;
                }
                let Some(j) = self.shifted(i, &p, &k, &mut q) else {
                    continue;
                };
                let accept = cache.prob(self.beta, &k) / shell.p_bar;
                if rng.open01() < accept {
                    out.push((i, j));
                }
            }
        }
    }

    fn shifted(&self, i: usize, p: &[i64], k: &[i64], q: &mut [i64]) -> Option<usize> {
        let mut j = i as i64;
        for a in 0..self.d {
            q[a] = p[a] + k[a];
            if q[a] < self.lattice_box.lo[a] || q[a] > self.lattice_box.hi[a] {
                return None;
            }
            j += k[a] * self.strides[a] as i64;
        }
        Some(j as usize)
    }
}

fn decode(mut pos: usize, side: usize, half: i64, k: &mut [i64]) {
    for a in (0..k.len()).rev() {
        k[a] = (pos % side) as i64 - half;
        pos /= side;
    }
}

fn lex_positive(k: &[i64]) -> bool {
    k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

fn l1(k: &[i64]) -> i64 {
    k.iter().map(|c| c.abs()).sum()
}

fn for_each_in_cube(d: usize, half: i64, mut f: impl FnMut(&[i64])) {
    let mut k = vec![-half; d];
    loop {
        f(&k);
        let mut a = d;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            k[a] += 1;
            if k[a] <= half {
                break;
            }
            k[a] = -half;
        }
    }
}

/// Reference sampler: one Bernoulli draw per pair. Quadratic in the box
/// size; kept for validating [`sample_discrete`] on small boxes.
pub fn sample_discrete_naive(
    params: &ModelParams,
    lattice_box: &LatticeBox,
    stream: &Stream,
) -> Result<LatticeGraph> {
    params.validate()?;
    check_box(params, lattice_box)?;
    let n = lattice_box.len();
    if n > 1 << 14 {
        return Err(Error::Resource("naive sampler limited to 16384 vertices".into()));
    }
    let cache = MassCache::new(params.d);
    let mut rng = stream.split("naive");
    let pts: Vec<Vec<i64>> = (0..n).map(|i| lattice_box.point(i)).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if l1_i(&pts[i], &pts[j]) <= 1 {
                continue;
            }
            let k: Vec<i64> = pts[j].iter().zip(&pts[i]).map(|(a, b)| a - b).collect();
            if rng.open01() < cache.prob(params.beta, &k) {
                edges.push((i, j));
            }
        }
    }
    LatticeGraph::from_index_pairs(lattice_box.clone(), edges, params.clone())
}

/// Adds an independent `extra_beta` sample to `base`. Since
/// `(1 - p(b1)) (1 - p(b2)) = 1 - p(b1 + b2)`, the union is an exact
/// `(b1 + b2)` sample whose edge set contains `base`.
pub fn superpose_discrete(
    base: &LatticeGraph,
    extra_beta: f64,
    stream: &Stream,
) -> Result<LatticeGraph> {
    superpose_discrete_with(base, extra_beta, stream, &MassCache::new(base.params.d))
}

pub fn superpose_discrete_with(
    base: &LatticeGraph,
    extra_beta: f64,
    stream: &Stream,
    cache: &MassCache,
) -> Result<LatticeGraph> {
    if !(extra_beta.is_finite() && extra_beta > 0.0) {
        return Err(Error::InvalidParams(format!(
            "beta increment must be positive, got {extra_beta}"
        )));
    }
    let extra = sample_discrete_with(
        &base.params.with_beta(extra_beta),
        &base.lattice_box,
        stream,
        cache,
    )?;
    base.union(&extra, base.params.with_beta(base.params.beta + extra_beta))
}
