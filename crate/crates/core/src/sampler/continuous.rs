//! Poisson edge process of the continuous model.
//!
//! Edges are unordered pairs `{x, y}`; the process has intensity
//! `beta |x - y|^{-2d}` on the half-space `x ≺ y` (lexicographic), so the
//! number of edges between disjoint sets `A`, `B` is Poisson with mean
//! `beta ∫_A ∫_B |x - y|^{-2d}`.
//!
//! Sampling uses a dominating process: a Poisson number of proposals, each
//! with a uniform first endpoint, a scope drawn from the radial density
//! `∝ r^{-d-1}` on `[delta, D)` and a uniform direction. Proposals whose
//! second endpoint leaves the window are discarded.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{canonicalize_edge, EdgeConfiguration, ModelParams, Point, Window};
use crate::rng::Stream;

/// Surface measure of the unit sphere in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / statrs::function::gamma::gamma(h)
}

/// Upper bound on dominating-process proposals per sample.
pub const MAX_PROPOSALS: f64 = 5e7;

/// Mean number of proposals of the dominating process.
///
/// Ordered pairs `(x, y)` with `x` in the window and `delta <= |x - y| < D`
/// carry mass `|W| σ_{d-1} (delta^{-d} - D^{-d}) / d` under `|x - y|^{-2d}`;
/// the unordered process takes half of it.
pub fn proposal_mean(params: &ModelParams, window: &Window) -> f64 {
    let d = params.d as i32;
    let upper = params.delta_max.min(window.diameter());
    if params.delta_min >= upper {
        return 0.0;
    }
    let radial = params.delta_min.powi(-d) - upper.powi(-d);
    params.beta * window.volume() * unit_sphere_area(params.d) * radial / (2.0 * d as f64)
}

pub fn sample_continuous(
    params: &ModelParams,
    window: &Window,
    stream: &Stream,
) -> Result<EdgeConfiguration> {
    if params.delta_min <= 0.0 {
        return Err(Error::InvalidParams(
            "delta must be positive (zero gives infinite intensity)".into(),
        ));
    }
    params.validate()?;
    let d = params.d;
    if window.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: window.dim(),
        });
    }
    let mut cfg = EdgeConfiguration::empty(params.clone(), window.clone());
    cfg.seed_trace.push(stream.label().to_owned());
    let mean = proposal_mean(params, window);
    if mean <= 0.0 {
        return Ok(cfg);
    }
    if mean > MAX_PROPOSALS {
        return Err(Error::Resource(format!(
            "expected {mean:.3e} proposals exceeds {MAX_PROPOSALS:.0e}"
        )));
    }
    let mut rng = stream.clone();
    let count = Poisson::new(mean)
        .map_err(|e| Error::InvalidParams(e.to_string()))?
        .sample(&mut rng) as u64;
    let delta = params.delta_min;
    let upper = params.delta_max.min(window.diameter());
    let shrink = 1.0 - (delta / upper).powi(d as i32);
    let lo = window.lo.coords();
    let hi = window.hi.coords();
    let mut x = vec![0.0; d];
    let mut dir = vec![0.0; d];
    for _ in 0..count {
        for a in 0..d {
            x[a] = lo[a] + (hi[a] - lo[a]) * rng.random::<f64>();
        }
        let u: f64 = rng.random();
        let r = delta * (1.0 - u * shrink).powf(-1.0 / d as f64);
        random_direction(&mut rng, &mut dir);
        let y: Vec<f64> = (0..d).map(|a| x[a] + r * dir[a]).collect();
        if !window.contains_coords(&y) || r < delta || r >= params.delta_max {
            continue;
        }
        let edge = canonicalize_edge(Point::from_vec(x.clone()), Point::from_vec(y))?;
        cfg.edges.push(edge);
    }
    cfg.sort_edges();
    Ok(cfg)
}

fn random_direction(rng: &mut Stream, dir: &mut [f64]) {
    if dir.len() == 1 {
        dir[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut n2 = 0.0;
        for c in dir.iter_mut() {
            *c = rng.sample(StandardNormal);
            n2 += *c * *c;
        }
        if n2 > 1e-300 {
            let n = n2.sqrt();
            dir.iter_mut().for_each(|c| *c /= n);
            return;
        }
    }
}

/// Returns `base` plus an independent sample at `extra_beta` on the same
/// window and scope range; the result is a `(beta + extra_beta)` sample.
pub fn superpose(
    base: &EdgeConfiguration,
    extra_beta: f64,
    stream: &Stream,
) -> Result<EdgeConfiguration> {
    if !(extra_beta.is_finite() && extra_beta > 0.0) {
        return Err(Error::InvalidParams(format!(
            "beta increment must be positive, got {extra_beta}"
        )));
    }
    let extra = sample_continuous(&base.params.with_beta(extra_beta), &base.window, stream)?;
    merge(base, &extra)
}

/// Union of two samples that share window, dimension and scope range.
pub fn merge(base: &EdgeConfiguration, extra: &EdgeConfiguration) -> Result<EdgeConfiguration> {
    if base.window != extra.window
        || base.params.d != extra.params.d
        || base.params.delta_min != extra.params.delta_min
        || base.params.delta_max != extra.params.delta_max
    {
        return Err(Error::Precondition(
            "superposed samples must share window and scope range".into(),
        ));
    }
    let mut out = base.clone();
    out.params.beta = base.params.beta + extra.params.beta;
    out.edges.extend(extra.edges.iter().cloned());
    out.sort_edges();
    out.seed_trace.extend(extra.seed_trace.iter().cloned());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(1) - 2.0).abs() < 1e-12);
        assert!((unit_sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn zero_delta_rejected() {
        let params = ModelParams {
            d: 1,
            beta: 1.0,
            delta_min: 0.0,
            delta_max: f64::INFINITY,
            seed: 0,
        };
        let w = Window::cube(1, 0.0, 2.0).unwrap();
        assert!(sample_continuous(&params, &w, &derive_stream(0, "c")).is_err());
    }

    #[test]
    fn empty_when_delta_exceeds_diameter() {
        let params = ModelParams::new(2, 3.0, 5.0, f64::INFINITY, 0).unwrap();
        let w = Window::cube(2, 0.0, 3.0).unwrap();
        for s in 0..20 {
            assert!(sample_continuous(&params, &w, &derive_stream(s, "c"))
                .unwrap()
                .edges
                .is_empty());
        }
    }

    #[test]
    fn samples_validate() {
        for d in 1..=3 {
            let params = ModelParams::new(d, 2.0, 0.3, 4.0, 0).unwrap();
            let w = Window::cube(d, -1.0, 3.0).unwrap();
            for s in 0..30 {
                let cfg = sample_continuous(&params, &w, &derive_stream(s, "v")).unwrap();
                cfg.validate().unwrap();
            }
        }
    }

    #[test]
    fn unit_interval_count_mean() {
        // beta ∫_0^1 ∫_{x+1}^2 (y - x)^{-2} dy dx = beta (1 - ln 2)
        let params = ModelParams::new(1, 1.0, 1.0, f64::INFINITY, 0).unwrap();
        let w = Window::cube(1, 0.0, 2.0).unwrap();
        let n = 20_000u64;
        let total: usize = (0..n)
            .map(|s| {
                sample_continuous(&params, &w, &derive_stream(s, "m"))
                    .unwrap()
                    .edges
                    .len()
            })
            .sum();
        let mean = 1.0 - 2f64.ln();
        let emp = total as f64 / n as f64;
        assert!((emp - mean).abs() < 4.0 * (mean / n as f64).sqrt(), "{emp}");
    }

    #[test]
    fn superpose_keeps_base_edges() {
        let params = ModelParams::new(2, 0.5, 0.5, f64::INFINITY, 0).unwrap();
        let w = Window::cube(2, 0.0, 4.0).unwrap();
        let base = sample_continuous(&params, &w, &derive_stream(1, "b")).unwrap();
        let up = superpose(&base, 1.0, &derive_stream(1, "e")).unwrap();
        assert!(up.edges.len() >= base.edges.len());
        for e in &base.edges {
            assert!(up.edges.contains(e));
        }
        assert!((up.params.beta - 1.5).abs() < 1e-15);
        up.validate().unwrap();
        let other = EdgeConfiguration::empty(params.clone(), Window::cube(2, 0.0, 5.0).unwrap());
        assert!(merge(&base, &other).is_err());
    }

    #[test]
    fn superposing_empty_sample_is_identity() {
        let params = ModelParams::new(1, 1.0, 1.0, f64::INFINITY, 0).unwrap();
        let w = Window::cube(1, 0.0, 3.0).unwrap();
        let base = sample_continuous(&params, &w, &derive_stream(2, "b")).unwrap();
        let extra = EdgeConfiguration::empty(params.with_beta(0.5), w);
        let out = merge(&base, &extra).unwrap();
        assert_eq!(out.edges, base.edges);
    }
}
