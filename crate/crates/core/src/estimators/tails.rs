use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::medians::{discrete_query_box, MedianTable, ModelKind};
use super::stats::{mean, std_error};
use crate::error::{Error, Result};
use crate::metric::LatticeAdjacency;
use crate::model::{LatticeBox, ModelParams};
use crate::rng::derive_stream;
use crate::sampler::{sample_discrete_with, superpose_discrete_with, MassCache};

/// Diameters of `[0, n]^d` (under the metric of a padded sample) for each
/// replicate, together with `d_hat(0, n 1)` on the same sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiameterSamples {
    pub table: MedianTable,
    pub corner_distances: Vec<Vec<f64>>,
}

pub fn sample_diameters(
    params: &ModelParams,
    n_values: &[u64],
    replicates: usize,
) -> Result<DiameterSamples> {
    if n_values.is_empty() || n_values.windows(2).any(|w| w[0] >= w[1]) || n_values[0] == 0 {
        return Err(Error::InvalidParams("n values must be positive and increasing".into()));
    }
    let d = params.d;
    let n_max = *n_values.last().unwrap();
    let lattice_box = discrete_query_box(d, n_max)?;
    let subs: Vec<LatticeBox> = n_values
        .iter()
        .map(|&n| LatticeBox::cube(d, 0, n as i64))
        .collect::<Result<_>>()?;
    let cache = MassCache::new(d);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<(Vec<f64>, Vec<f64>)> {
            let stream = derive_stream(params.seed, &format!("tails/replicate/{r}"));
            let graph = sample_discrete_with(params, &lattice_box, &stream, &cache)?;
            let adj = LatticeAdjacency::new(&graph);
            let diam = adj.nested_diameters(&subs)?;
            let dist = adj.bfs(lattice_box.index(&vec![0; d]).expect("origin in box"));
            let corner = n_values
                .iter()
                .map(|&n| dist[lattice_box.index(&vec![n as i64; d]).expect("in box")] as f64)
                .collect();
            Ok((diam.into_iter().map(f64::from).collect(), corner))
        })
        .collect::<Result<_>>()?;
    let (diams, corners): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(DiameterSamples {
        table: MedianTable::from_samples(ModelKind::Discrete, d, params.beta, n_values.to_vec(), diams),
        corner_distances: corners,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub eta: f64,
    pub theta_hat: f64,
    pub n_values: Vec<u64>,
    /// Empirical `E[exp((diam / n^theta)^eta)]` per `n`.
    pub mgf: Vec<f64>,
    pub mgf_std_error: Vec<f64>,
    pub mean_normalized: Vec<f64>,
    /// `max / min` of the MGF over `n`; infinite when some term overflowed.
    pub stability_ratio: f64,
    pub overflowed: bool,
    /// Samples where `diam([0, n]^d) < d_hat(0, n 1)`; the definition of the
    /// diameter forbids any.
    pub lower_bound_violations: usize,
}

pub fn tail_report(samples: &DiameterSamples, eta: f64, theta_hat: f64) -> Result<TailReport> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParams(format!("eta must be positive, got {eta}")));
    }
    let t = &samples.table;
    let mut mgf = Vec::new();
    let mut mgf_std_error = Vec::new();
    let mut mean_normalized = Vec::new();
    let mut overflowed = false;
    for (i, &n) in t.n_values.iter().enumerate() {
        let scale = (n as f64).powf(theta_hat);
        let norm: Vec<f64> = t.samples.iter().map(|row| row[i] / scale).collect();
        let terms: Vec<f64> = norm.iter().map(|v| v.powf(eta).exp()).collect();
        if terms.iter().any(|v| !v.is_finite()) {
            overflowed = true;
        }
        mgf.push(mean(&terms));
        mgf_std_error.push(std_error(&terms));
        mean_normalized.push(mean(&norm));
    }
    let stability_ratio = if overflowed {
        f64::INFINITY
    } else {
        let max = mgf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = mgf.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    };
    let lower_bound_violations = t
        .samples
        .iter()
        .zip(&samples.corner_distances)
        .map(|(diam, corner)| diam.iter().zip(corner).filter(|(a, b)| a < b).count())
        .sum();
    Ok(TailReport {
        eta,
        theta_hat,
        n_values: t.n_values.clone(),
        mgf,
        mgf_std_error,
        mean_normalized,
        stability_ratio,
        overflowed,
        lower_bound_violations,
    })
}

pub fn diameter_tail(
    params: &ModelParams,
    n_values: &[u64],
    replicates: usize,
    eta: f64,
    theta_hat: f64,
) -> Result<TailReport> {
    if !(theta_hat > 0.0 && theta_hat < 1.0) {
        return Err(Error::InvalidParams(format!("theta must lie in (0, 1), got {theta_hat}")));
    }
    if eta >= 1.0 / (1.0 - theta_hat) {
        return Err(Error::InvalidParams(format!(
            "eta = {eta} is outside (0, 1/(1 - theta)) = (0, {})",
            1.0 / (1.0 - theta_hat)
        )));
    }
    tail_report(&sample_diameters(params, n_values, replicates)?, eta, theta_hat)
}

/// Diameters of the nested intervals `[-n, n]^d` on one sample of
/// `[-half_width, half_width]^d`, for increasing betas coupled by
/// superposition. Returns `curves[b][i]` for `betas[b]`, `n_values[i]`.
pub fn coupled_diameters(
    d: usize,
    betas: &[f64],
    half_width: i64,
    n_values: &[u64],
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    if betas.is_empty() || betas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("betas must be strictly increasing".into()));
    }
    if n_values.iter().any(|&n| n as i64 > half_width) {
        return Err(Error::InvalidParams("n exceeds the sample half-width".into()));
    }
    let lattice_box = LatticeBox::cube(d, -half_width, half_width)?;
    let subs: Vec<LatticeBox> = n_values
        .iter()
        .map(|&n| LatticeBox::cube(d, -(n as i64), n as i64))
        .collect::<Result<_>>()?;
    let cache = MassCache::new(d);
    let stream = derive_stream(seed, "diameters");
    let params = ModelParams::discrete(d, betas[0], seed)?;
    let mut graph = sample_discrete_with(&params, &lattice_box, &stream.split("beta/0"), &cache)?;
    let mut curves = Vec::with_capacity(betas.len());
    for (b, &beta) in betas.iter().enumerate() {
        if b > 0 {
            graph = superpose_discrete_with(
                &graph,
                beta - betas[b - 1],
                &stream.split(&format!("beta/{b}")),
                &cache,
            )?;
        }
        curves.push(LatticeAdjacency::new(&graph).nested_diameters(&subs)?);
    }
    Ok(curves)
}
