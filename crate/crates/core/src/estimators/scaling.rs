use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::medians::continuous_query_window;
use super::stats::{ks_two_sample, KsResult};
use crate::error::{Error, Result};
use crate::metric::continuous_distance;
use crate::model::{ModelParams, Point};
use crate::rng::derive_stream;
use crate::sampler::sample_continuous;

pub const MIN_KS_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub n: f64,
    pub exponent: f64,
    /// `d_(1/n, ∞)(0, 1)` on the unit-scale window.
    pub small_scale: Vec<f64>,
    /// `n^{-exponent} d_(1, ∞)(0, n 1)` on the window scaled by `n`.
    pub large_scale: Vec<f64>,
    pub ks: KsResult,
}

/// Compares the laws of `d_(1/n, ∞)(0, 1)` and `n^{-exponent} d_(1, ∞)(0, n 1)`
/// on independently seeded samples (padding 2 around the query segment on
/// both sides). The two agree in law for `exponent = 1`.
pub fn scaling_ks_test(
    params: &ModelParams,
    n: f64,
    samples: usize,
    exponent: f64,
) -> Result<ScalingReport> {
    if samples < MIN_KS_SAMPLES {
        return Err(Error::InvalidParams(format!(
            "need at least {MIN_KS_SAMPLES} samples per side, got {samples}"
        )));
    }
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::InvalidParams(format!("scale must be positive, got {n}")));
    }
    let d = params.d;
    let side = |scale: f64, delta: f64, tag: &str, weight: f64| -> Result<Vec<f64>> {
        let window = continuous_query_window(d, scale, 2.0)?;
        let p = ModelParams::new(d, params.beta, delta, f64::INFINITY, params.seed)?;
        let x = Point::zeros(d);
        let y = Point::splat(d, scale);
        (0..samples)
            .into_par_iter()
            .map(|s| {
                let stream = derive_stream(params.seed, &format!("scaling/{tag}/{s}"));
                let cfg = sample_continuous(&p, &window, &stream)?;
                Ok(continuous_distance(&cfg, &x, &y, &window)?.value * weight)
            })
            .collect()
    };
    let small_scale = side(1.0, 1.0 / n, "small", 1.0)?;
    let large_scale = side(n, 1.0, "large", n.powf(-exponent))?;
    let ks = ks_two_sample(&small_scale, &large_scale)?;
    Ok(ScalingReport {
        n,
        exponent,
        small_scale,
        large_scale,
        ks,
    })
}
