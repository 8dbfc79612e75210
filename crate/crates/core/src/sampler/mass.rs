//! Cube-pair interaction masses `∫_{V(0)}∫_{V(k)} |u - v|^{-2d} du dv`.
//!
//! Substituting `w = v - u` coordinatewise turns the `2d`-dimensional
//! integral into a `d`-dimensional one with tent weights:
//! `∫_{[-1,1]^d} Π(1 - |w_i|) |k + w|^{-2d} dw`. The tent has a kink at 0, so
//! each axis is split there and every orthant is integrated with an adaptive
//! tensor Gauss-Legendre rule.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Relative accuracy target for the quadrature.
pub const MASS_RTOL: f64 = 1e-8;

const MAX_DEPTH: u32 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct CubePairMass {
    pub offset: Vec<i64>,
    /// `+∞` when the two unit cubes touch.
    pub mass: f64,
}

/// True when the unit cubes centred at 0 and `k` share at least a corner.
pub fn cubes_touch(k: &[i64]) -> bool {
    let linf = k.iter().map(|c| c.abs()).max().unwrap_or(0);
    linf == 1
}

pub fn cube_pair_mass(d: usize, k: &[i64]) -> Result<CubePairMass> {
    if k.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: k.len(),
        });
    }
    if k.iter().all(|&c| c == 0) {
        return Err(Error::ZeroOffset);
    }
    Ok(CubePairMass {
        offset: k.to_vec(),
        // evaluated on the orbit representative so every member of an
        // orbit gets bit-identical mass
        mass: mass_unchecked(d, &orbit_key(k)),
    })
}

fn mass_unchecked(d: usize, k: &[i64]) -> f64 {
    if cubes_touch(k) {
        return f64::INFINITY;
    }
    if d == 1 {
        // ∫∫ (k + v - u)^{-2} du dv = ln(k^2 / (k^2 - 1))
        let k2 = (k[0] as f64).powi(2);
        return -(-1.0 / k2).ln_1p();
    }
    let kf: Vec<f64> = k.iter().map(|&c| c as f64).collect();
    let mut total = 0.0;
    for orthant in 0..(1usize << d) {
        let (lo, hi): (Vec<f64>, Vec<f64>) = (0..d)
            .map(|a| if orthant >> a & 1 == 0 { (-1.0, 0.0) } else { (0.0, 1.0) })
            .unzip();
        total += adaptive(&kf, &lo, &hi, 0);
    }
    total
}

fn integrand(k: &[f64], w: &[f64]) -> f64 {
    let d = k.len();
    let mut weight = 1.0;
    let mut r2 = 0.0;
    for a in 0..d {
        weight *= 1.0 - w[a].abs();
        let x = k[a] + w[a];
        r2 += x * x;
    }
    weight * r2.powi(-(d as i32))
}

fn adaptive(k: &[f64], lo: &[f64], hi: &[f64], depth: u32) -> f64 {
    let coarse = tensor_gauss(k, lo, hi, &GL6);
    let fine = tensor_gauss(k, lo, hi, &GL12);
    if (fine - coarse).abs() <= MASS_RTOL * fine.abs() * 0.1 || depth >= MAX_DEPTH {
        return fine;
    }
    let d = k.len();
    let mid: Vec<f64> = (0..d).map(|a| 0.5 * (lo[a] + hi[a])).collect();
    let mut sum = 0.0;
    for child in 0..(1usize << d) {
        let (clo, chi): (Vec<f64>, Vec<f64>) = (0..d)
            .map(|a| {
                if child >> a & 1 == 0 {
                    (lo[a], mid[a])
                } else {
                    (mid[a], hi[a])
                }
            })
            .unzip();
        sum += adaptive(k, &clo, &chi, depth + 1);
    }
    sum
}

struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

static GL6: std::sync::LazyLock<GaussRule> = std::sync::LazyLock::new(|| gauss_legendre(6));
static GL12: std::sync::LazyLock<GaussRule> = std::sync::LazyLock::new(|| gauss_legendre(12));

/// Nodes and weights on [-1, 1] by Newton iteration on the Legendre polynomial.
fn gauss_legendre(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    GaussRule { nodes, weights }
}

fn tensor_gauss(k: &[f64], lo: &[f64], hi: &[f64], rule: &GaussRule) -> f64 {
    let d = k.len();
    let n = rule.nodes.len();
    let half: Vec<f64> = (0..d).map(|a| 0.5 * (hi[a] - lo[a])).collect();
    let mid: Vec<f64> = (0..d).map(|a| 0.5 * (hi[a] + lo[a])).collect();
    let jac: f64 = half.iter().product();
    let mut idx = vec![0usize; d];
    let mut w = vec![0.0; d];
    let mut sum = 0.0;
    loop {
        let mut weight = 1.0;
        for a in 0..d {
            w[a] = mid[a] + half[a] * rule.nodes[idx[a]];
            weight *= rule.weights[idx[a]];
        }
        sum += weight * integrand(k, &w);
        let mut a = 0;
        loop {
            idx[a] += 1;
            if idx[a] < n {
                break;
            }
            idx[a] = 0;
            a += 1;
            if a == d {
                return sum * jac;
            }
        }
    }
}

/// Canonical representative of the symmetry orbit of `k` under signed
/// coordinate permutations.
pub fn orbit_key(k: &[i64]) -> Vec<i64> {
    let mut key: Vec<i64> = k.iter().map(|c| c.abs()).collect();
    key.sort_unstable();
    key
}

/// `1 - exp(-beta * mass)`, with `p = 1` for nearest neighbours and touching cubes.
pub fn discrete_edge_prob(params: &ModelParams, k: &[i64]) -> Result<f64> {
    let m = cube_pair_mass(params.d, k)?;
    Ok(prob_from_mass(params.beta, k, m.mass))
}

fn prob_from_mass(beta: f64, k: &[i64], mass: f64) -> f64 {
    let l1: i64 = k.iter().map(|c| c.abs()).sum();
    if l1 == 1 || mass.is_infinite() {
        1.0
    } else {
        -(-beta * mass).exp_m1()
    }
}

/// Memoized masses per symmetry orbit, shared by the samplers.
#[derive(Debug, Default)]
pub struct MassCache {
    d: usize,
    table: Mutex<HashMap<Vec<i64>, f64>>,
}

impl MassCache {
    pub fn new(d: usize) -> Self {
        MassCache {
            d,
            table: Mutex::new(HashMap::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Mass for a nonzero offset of the right dimension.
    pub fn mass(&self, k: &[i64]) -> f64 {
        debug_assert_eq!(k.len(), self.d);
        let key = orbit_key(k);
        if let Some(&m) = self.table.lock().expect("mass cache poisoned").get(&key) {
            return m;
        }
        let m = mass_unchecked(self.d, &key);
        self.table
            .lock()
            .expect("mass cache poisoned")
            .insert(key, m);
        m
    }

    pub fn prob(&self, beta: f64, k: &[i64]) -> f64 {
        prob_from_mass(beta, k, self.mass(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reference: plain composite Gauss on the original
    /// 2d-dimensional integral over the product of the two unit cubes.
    fn direct_mass(k: &[i64], panels: usize) -> f64 {
        let d = k.len();
        let rule = gauss_legendre(4);
        let h = 1.0 / panels as f64;
        let mut pts = Vec::new();
        for p in 0..panels {
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                pts.push(((p as f64 + 0.5 + 0.5 * x) * h, 0.5 * h * w));
            }
        }
        let m = pts.len();
        let mut idx = vec![0usize; 2 * d];
        let mut sum = 0.0;
        loop {
            let mut weight = 1.0;
            let mut r2 = 0.0;
            for a in 0..d {
                let (u, wu) = pts[idx[a]];
                let (v, wv) = pts[idx[d + a]];
                weight *= wu * wv;
                let diff = k[a] as f64 + v - u;
                r2 += diff * diff;
            }
            sum += weight * r2.powi(-(d as i32));
            let mut a = 0;
            loop {
                idx[a] += 1;
                if idx[a] < m {
                    break;
                }
                idx[a] = 0;
                a += 1;
                if a == 2 * d {
                    return sum;
                }
            }
        }
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let rule = gauss_legendre(6);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let x10: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(10))
            .sum();
        assert!((x10 - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn one_dimensional_closed_form() {
        let m = cube_pair_mass(1, &[2]).unwrap().mass;
        assert!((m - (4.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!((m - 0.287682072451781).abs() < 1e-12);
        for k in [2i64, 3, 7, 40] {
            let reference = direct_mass(&[k], 16);
            let closed = cube_pair_mass(1, &[k]).unwrap().mass;
            assert!(
                ((closed - reference) / closed).abs() < 1e-9,
                "k={k}: {closed} vs {reference}"
            );
        }
    }

    #[test]
    fn touching_cubes_diverge() {
        assert!(cube_pair_mass(1, &[1]).unwrap().mass.is_infinite());
        assert!(cube_pair_mass(2, &[1, 1]).unwrap().mass.is_infinite());
        assert!(cube_pair_mass(2, &[0, -1]).unwrap().mass.is_infinite());
        assert!(cube_pair_mass(3, &[1, -1, 1]).unwrap().mass.is_infinite());
        assert!(cube_pair_mass(2, &[2, 1]).unwrap().mass.is_finite());
    }

    #[test]
    fn corner_touching_integral_grows_without_bound() {
        // Truncating the integrand at |u - v| >= eps gives a log-divergent
        // integral as eps -> 0 for corner-touching squares.
        let k = [1.0, 1.0];
        let truncated = |eps: f64, panels: usize| {
            let rule = gauss_legendre(4);
            let h = 2.0 / panels as f64;
            let mut s = 0.0;
            for i in 0..panels {
                for j in 0..panels {
                    for (xa, wa) in rule.nodes.iter().zip(&rule.weights) {
                        for (xb, wb) in rule.nodes.iter().zip(&rule.weights) {
                            let w0 = -1.0 + (i as f64 + 0.5 + 0.5 * xa) * h;
                            let w1 = -1.0 + (j as f64 + 0.5 + 0.5 * xb) * h;
                            let r2 = (k[0] + w0).powi(2) + (k[1] + w1).powi(2);
                            if r2 >= eps * eps {
                                s += 0.25 * h * h * wa * wb * (1.0 - w0.abs()) * (1.0 - w1.abs())
                                    / (r2 * r2);
                            }
                        }
                    }
                }
            }
            s
        };
        let a = truncated(0.2, 200);
        let b = truncated(0.05, 400);
        let c = truncated(0.0125, 800);
        assert!(b > a + 0.1 && c > b + 0.1, "{a} {b} {c}");
    }

    #[test]
    fn two_dimensional_matches_direct_integral() {
        for k in [[2i64, 0], [2, 1], [3, 1], [2, 2], [5, -3]] {
            let fast = cube_pair_mass(2, &k).unwrap().mass;
            let reference = direct_mass(&k, 12);
            assert!(
                ((fast - reference) / fast).abs() < 1e-7,
                "k={k:?}: {fast} vs {reference}"
            );
        }
    }

    #[test]
    fn far_offsets_approach_point_mass() {
        let k = [40i64, 30];
        let m = cube_pair_mass(2, &k).unwrap().mass;
        let point = 50f64.powi(-4);
        assert!(((m - point) / point).abs() < 1e-2);
    }

    #[test]
    fn mass_symmetries() {
        let base = cube_pair_mass(2, &[3, 1]).unwrap().mass;
        for k in [[-3i64, 1], [3, -1], [1, 3], [-1, -3]] {
            let m = cube_pair_mass(2, &k).unwrap().mass;
            assert!(((m - base) / base).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_offset_rejected() {
        assert_eq!(cube_pair_mass(2, &[0, 0]), Err(Error::ZeroOffset));
        let params = ModelParams::discrete(1, 1.0, 0).unwrap();
        assert_eq!(discrete_edge_prob(&params, &[0]), Err(Error::ZeroOffset));
    }

    #[test]
    fn edge_probabilities() {
        let params = ModelParams::discrete(1, 1.0, 0).unwrap();
        assert!((discrete_edge_prob(&params, &[2]).unwrap() - 0.25).abs() < 1e-14);
        assert!((discrete_edge_prob(&params, &[-2]).unwrap() - 0.25).abs() < 1e-14);
        assert_eq!(discrete_edge_prob(&params, &[1]).unwrap(), 1.0);
        for d in 1..=3 {
            let params = ModelParams::discrete(d, 0.7, 0).unwrap();
            let mut k = vec![0i64; d];
            k[d - 1] = -1;
            assert_eq!(discrete_edge_prob(&params, &k).unwrap(), 1.0);
        }
        let tiny = ModelParams::discrete(2, 1e-12, 0).unwrap();
        assert!(discrete_edge_prob(&tiny, &[3, 1]).unwrap() < 1e-12);
        // p = 1 - ((k^2 - 1)/k^2)^beta in one dimension
        let params = ModelParams::discrete(1, 2.5, 0).unwrap();
        for k in 2..20i64 {
            let k2 = (k * k) as f64;
            let expect = 1.0 - ((k2 - 1.0) / k2).powf(2.5);
            assert!((discrete_edge_prob(&params, &[k]).unwrap() - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn cache_matches_direct() {
        let cache = MassCache::new(2);
        for k in [[2i64, 1], [-1, 2], [4, 0]] {
            let direct = cube_pair_mass(2, &k).unwrap().mass;
            assert_eq!(cache.mass(&k), direct);
            assert_eq!(cache.mass(&k), direct);
        }
    }
}
