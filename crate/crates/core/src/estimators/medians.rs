use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{median, ols, quantile};
use crate::error::{Error, Result};
use crate::metric::{continuous_distance, internal_distance, LatticeAdjacency};
use crate::model::{LatticeBox, ModelParams, Point, Window};
use crate::rng::derive_stream;
use crate::sampler::{sample_continuous, sample_discrete_with, superpose, superpose_discrete_with, MassCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Discrete,
    Continuous,
}

/// Per-`n` medians of `d_hat(0, n 1)` (discrete) or of
/// `d_(1/n, ∞)(0, 1) = d_(1, ∞)(0, n 1) / n` (continuous).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianTable {
    pub model: ModelKind,
    pub d: usize,
    pub beta: f64,
    pub n_values: Vec<u64>,
    pub medians: Vec<f64>,
    pub replicates: usize,
    /// `samples[r][i]`: replicate `r` at `n_values[i]`; empty for tables
    /// built from medians alone.
    pub samples: Vec<Vec<f64>>,
}

impl MedianTable {
    pub fn from_samples(
        model: ModelKind,
        d: usize,
        beta: f64,
        n_values: Vec<u64>,
        samples: Vec<Vec<f64>>,
    ) -> Self {
        let medians = (0..n_values.len())
            .map(|i| median(&samples.iter().map(|row| row[i]).collect::<Vec<_>>()))
            .collect();
        MedianTable {
            model,
            d,
            beta,
            replicates: samples.len(),
            n_values,
            medians,
            samples,
        }
    }

    /// A table carrying only medians (no bootstrap possible).
    pub fn from_medians(model: ModelKind, d: usize, beta: f64, n_values: Vec<u64>, medians: Vec<f64>) -> Self {
        MedianTable {
            model,
            d,
            beta,
            n_values,
            medians,
            replicates: 0,
            samples: Vec::new(),
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.medians.windows(2).all(|w| w[0] <= w[1])
    }
}

fn check_n_values(n_values: &[u64]) -> Result<()> {
    if n_values.is_empty() || n_values[0] == 0 || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams(
            "n values must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Box used for `d_hat(0, n 1)`: `[0, n]^d` padded by `ceil(n/2)` per side.
pub fn discrete_query_box(d: usize, n: u64) -> Result<LatticeBox> {
    let pad = n.div_ceil(2) as i64;
    LatticeBox::cube(d, -pad, n as i64 + pad)
}

/// Window used for `d_(1,∞)(0, n 1)`: the cube concentric with `[0, n]^d`
/// whose side is `padding` times `n`.
/// Padding of continuous query windows. Window truncation biases distances
/// upward by a fixed fraction at every `n` (the windows scale with `n`); at
/// this factor doubling the window moves the medians by well under 1%.
pub const CONTINUOUS_PADDING: f64 = 16.0;

pub fn continuous_query_window(d: usize, n: f64, padding: f64) -> Result<Window> {
    let c = 0.5 * n;
    Window::cube(d, c - 0.5 * padding * n, c + 0.5 * padding * n)
}

pub fn estimate_medians(
    params: &ModelParams,
    n_values: &[u64],
    replicates: usize,
    model: ModelKind,
) -> Result<MedianTable> {
    let tables = match model {
        ModelKind::Discrete => coupled_discrete(params.d, &[params.beta], n_values, replicates, params.seed)?.0,
        ModelKind::Continuous => {
            coupled_continuous(
                params.d,
                &[params.beta],
                n_values,
                replicates,
                params.seed,
                CONTINUOUS_PADDING,
            )?
            .0
        }
    };
    Ok(tables.into_iter().next().expect("one table per beta"))
}

/// Discrete tables for increasing `betas`, coupled by superposition: each
/// replicate samples the first `beta` and adds independent increments.
/// Also returns the number of (replicate, n, beta step) triples where the
/// distance increased with `beta`, which the coupling forbids.
pub fn coupled_discrete(
    d: usize,
    betas: &[f64],
    n_values: &[u64],
    replicates: usize,
    seed: u64,
) -> Result<(Vec<MedianTable>, usize)> {
    check_betas(betas)?;
    check_n_values(n_values)?;
    if replicates == 0 {
        return Err(Error::InvalidParams("need at least one replicate".into()));
    }
    let n_max = *n_values.last().unwrap();
    let lattice_box = discrete_query_box(d, n_max)?;
    if lattice_box.len() > crate::sampler::discrete::MAX_VERTICES {
        return Err(Error::Resource(format!(
            "box for n = {n_max} has {} vertices",
            lattice_box.len()
        )));
    }
    let origin = vec![0i64; d];
    let targets: Vec<usize> = n_values
        .iter()
        .map(|&n| lattice_box.index(&vec![n as i64; d]).expect("target in box"))
        .collect();
    let cache = MassCache::new(d);
    // rows[r][b][i]
    let rows: Vec<Vec<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<Vec<Vec<f64>>> {
            let stream = derive_stream(seed, &format!("medians/discrete/replicate/{r}"));
            let mut out = Vec::with_capacity(betas.len());
            let params = ModelParams::discrete(d, betas[0], seed)?;
            let mut graph = sample_discrete_with(&params, &lattice_box, &stream.split("beta/0"), &cache)?;
            for (b, &beta) in betas.iter().enumerate() {
                if b > 0 {
                    graph = superpose_discrete_with(
                        &graph,
                        beta - betas[b - 1],
                        &stream.split(&format!("beta/{b}")),
                        &cache,
                    )?;
                }
                let adj = LatticeAdjacency::new(&graph);
                let src = lattice_box.index(&origin).expect("origin in box");
                let dist = adj.bfs(src);
                out.push(targets.iter().map(|&t| dist[t] as f64).collect());
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(assemble(ModelKind::Discrete, d, betas, n_values, rows))
}

/// Continuous analogue of [`coupled_discrete`]; every `(replicate, n)` gets
/// its own sample on the padded window.
pub fn coupled_continuous(
    d: usize,
    betas: &[f64],
    n_values: &[u64],
    replicates: usize,
    seed: u64,
    padding: f64,
) -> Result<(Vec<MedianTable>, usize)> {
    check_betas(betas)?;
    check_n_values(n_values)?;
    if replicates == 0 {
        return Err(Error::InvalidParams("need at least one replicate".into()));
    }
    if !(padding >= 1.0) {
        return Err(Error::InvalidParams(format!("padding must be at least 1, got {padding}")));
    }
    let rows: Vec<Vec<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<Vec<Vec<f64>>> {
            let mut out = vec![Vec::with_capacity(n_values.len()); betas.len()];
            for &n in n_values {
                let stream = derive_stream(seed, &format!("medians/continuous/replicate/{r}/n/{n}"));
                let nf = n as f64;
                let window = continuous_query_window(d, nf, padding)?;
                let x = Point::zeros(d);
                let y = Point::splat(d, nf);
                let params = ModelParams::new(d, betas[0], 1.0, f64::INFINITY, seed)?;
                let mut cfg = sample_continuous(&params, &window, &stream.split("beta/0"))?;
                for (b, &beta) in betas.iter().enumerate() {
                    if b > 0 {
                        cfg = superpose(&cfg, beta - betas[b - 1], &stream.split(&format!("beta/{b}")))?;
                    }
                    let v = continuous_distance(&cfg, &x, &y, &window)?.value;
                    out[b].push(v / nf);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(assemble(ModelKind::Continuous, d, betas, n_values, rows))
}

fn check_betas(betas: &[f64]) -> Result<()> {
    if betas.is_empty() || betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::InvalidParams("betas must be positive".into()));
    }
    if betas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("betas must be strictly increasing".into()));
    }
    Ok(())
}

fn assemble(
    model: ModelKind,
    d: usize,
    betas: &[f64],
    n_values: &[u64],
    rows: Vec<Vec<Vec<f64>>>,
) -> (Vec<MedianTable>, usize) {
    let mut violations = 0;
    for row in &rows {
        for b in 1..betas.len() {
            for i in 0..n_values.len() {
                if row[b][i] > row[b - 1][i] + 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    let tables = betas
        .iter()
        .enumerate()
        .map(|(b, &beta)| {
            let samples = rows.iter().map(|row| row[b].clone()).collect();
            MedianTable::from_samples(model, d, beta, n_values.to_vec(), samples)
        })
        .collect();
    (tables, violations)
}

/// Continuous medians with the query window padded by `CONTINUOUS_PADDING`
/// versus twice that, on the same samples (drawn on the larger window; the
/// smaller value is the internal distance of the inner window).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaddingReport {
    pub n_values: Vec<u64>,
    pub padding: f64,
    pub medians_inner: Vec<f64>,
    pub medians_outer: Vec<f64>,
    pub relative_shift: Vec<f64>,
    pub max_relative_shift: f64,
    /// True when every shift is below 1%.
    pub accepted: bool,
}

pub fn padding_sensitivity(
    params: &ModelParams,
    n_values: &[u64],
    replicates: usize,
) -> Result<PaddingReport> {
    check_n_values(n_values)?;
    let d = params.d;
    let pairs: Vec<Vec<(f64, f64)>> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<Vec<(f64, f64)>> {
            n_values
                .iter()
                .map(|&n| {
                    let stream =
                        derive_stream(params.seed, &format!("padding/replicate/{r}/n/{n}"));
                    let nf = n as f64;
                    let outer = continuous_query_window(d, nf, 2.0 * CONTINUOUS_PADDING)?;
                    let inner = continuous_query_window(d, nf, CONTINUOUS_PADDING)?;
                    let unit = ModelParams::new(d, params.beta, 1.0, f64::INFINITY, params.seed)?;
                    let cfg = sample_continuous(&unit, &outer, &stream)?;
                    let x = Point::zeros(d);
                    let y = Point::splat(d, nf);
                    let v_outer = continuous_distance(&cfg, &x, &y, &outer)?.value / nf;
                    let v_inner = internal_distance(&cfg, &x, &y, &inner)?.value / nf;
                    Ok((v_inner, v_outer))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut medians_inner = Vec::new();
    let mut medians_outer = Vec::new();
    for i in 0..n_values.len() {
        medians_inner.push(median(&pairs.iter().map(|r| r[i].0).collect::<Vec<_>>()));
        medians_outer.push(median(&pairs.iter().map(|r| r[i].1).collect::<Vec<_>>()));
    }
    let relative_shift: Vec<f64> = medians_inner
        .iter()
        .zip(&medians_outer)
        .map(|(a, b)| (a - b).abs() / b)
        .collect();
    let max_relative_shift = relative_shift.iter().cloned().fold(0.0, f64::max);
    Ok(PaddingReport {
        n_values: n_values.to_vec(),
        padding: CONTINUOUS_PADDING,
        medians_inner,
        medians_outer,
        relative_shift,
        max_relative_shift,
        accepted: max_relative_shift < 0.01,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub theta_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub r_squared: f64,
    pub intercept: f64,
    pub beta: f64,
    pub d: usize,
    pub resamples: usize,
}

impl ThetaEstimate {
    pub fn in_unit_interval(&self) -> bool {
        self.theta_hat > 0.0 && self.theta_hat < 1.0
    }
}

/// Slope of `log(median distance)` against `log n`, with a percentile
/// bootstrap interval obtained by resampling whole replicates.
///
/// For continuous tables the regressed quantity is `n a_n`, the median of
/// `d_(1,∞)(0, n 1)`, so both models estimate the same exponent.
pub fn fit_theta(table: &MedianTable, resamples: usize, seed: u64) -> Result<ThetaEstimate> {
    let k = table.n_values.len();
    if k != table.medians.len() {
        return Err(Error::FitFailure("medians and n values differ in length".into()));
    }
    let mut distinct = table.n_values.clone();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::FitFailure("need at least 4 distinct n values".into()));
    }
    let (lo, hi) = (distinct[0] as f64, *distinct.last().unwrap() as f64);
    if hi / lo < 4.0 {
        return Err(Error::FitFailure("n values must span two dyadic octaves".into()));
    }
    let x: Vec<f64> = table.n_values.iter().map(|&n| (n as f64).ln()).collect();
    let to_y = |meds: &[f64]| -> Result<Vec<f64>> {
        meds.iter()
            .zip(&table.n_values)
            .map(|(&m, &n)| {
                let v = match table.model {
                    ModelKind::Discrete => m,
                    ModelKind::Continuous => m * n as f64,
                };
                if v > 0.0 && v.is_finite() {
                    Ok(v.ln())
                } else {
                    Err(Error::FitFailure(format!("nonpositive median at n = {n}")))
                }
            })
            .collect()
    };
    let y = to_y(&table.medians)?;
    if table.medians.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::FitFailure("medians are constant".into()));
    }
    let fit = ols(&x, &y)?;
    let (mut ci_low, mut ci_high) = (fit.slope, fit.slope);
    let reps = table.samples.len();
    let mut used = 0;
    if reps >= 2 && resamples > 0 {
        let mut rng = derive_stream(seed, "fit/bootstrap");
        let mut slopes = Vec::with_capacity(resamples);
        let mut col = vec![0.0; reps];
        for _ in 0..resamples {
            let pick: Vec<usize> = (0..reps).map(|_| rng.random_range(0..reps)).collect();
            let meds: Vec<f64> = (0..k)
                .map(|i| {
                    for (c, &r) in col.iter_mut().zip(&pick) {
                        *c = table.samples[r][i];
                    }
                    median(&col)
                })
                .collect();
            if let Ok(yb) = to_y(&meds) {
                if let Ok(f) = ols(&x, &yb) {
                    slopes.push(f.slope);
                }
            }
        }
        slopes.sort_by(f64::total_cmp);
        used = slopes.len();
        if used > 0 {
            ci_low = quantile(&slopes, 0.025);
            ci_high = quantile(&slopes, 0.975);
        }
    }
    Ok(ThetaEstimate {
        theta_hat: fit.slope,
        ci_low,
        ci_high,
        r_squared: fit.r_squared,
        intercept: fit.intercept,
        beta: table.beta,
        d: table.d,
        resamples: used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// `theta(beta_lo) > theta(beta_hi)` with disjoint intervals.
    Decreasing,
    /// Intervals overlap.
    Inconclusive,
    /// `theta(beta_lo) < theta(beta_hi)` with disjoint intervals.
    Increasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub estimates: Vec<ThetaEstimate>,
    pub tables: Vec<MedianTable>,
    /// Per-sample coupling failures (distance increasing in beta).
    pub coupled_violations: usize,
    pub verdicts: Vec<(f64, f64, Verdict)>,
}

/// Fits `theta` for each beta on superposition-coupled discrete samples and
/// compares consecutive betas.
pub fn theta_monotonicity(
    d: usize,
    betas: &[f64],
    n_values: &[u64],
    replicates: usize,
    resamples: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    if betas.len() < 2 {
        return Err(Error::InvalidParams("need at least two betas".into()));
    }
    let (tables, coupled_violations) = coupled_discrete(d, betas, n_values, replicates, seed)?;
    let estimates: Vec<ThetaEstimate> = tables
        .iter()
        .map(|t| fit_theta(t, resamples, seed))
        .collect::<Result<_>>()?;
    let verdicts = estimates
        .windows(2)
        .map(|w| {
            let v = if w[0].ci_low > w[1].ci_high {
                Verdict::Decreasing
            } else if w[0].ci_high < w[1].ci_low {
                Verdict::Increasing
            } else {
                Verdict::Inconclusive
            };
            (w[0].beta, w[1].beta, v)
        })
        .collect();
    Ok(MonotonicityReport {
        estimates,
        tables,
        coupled_violations,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn powers() -> Vec<u64> {
        (3..10).map(|k| 1u64 << k).collect()
    }

    #[test]
    fn exact_power_law() {
        let n = powers();
        for c in [1.0, 3.7] {
            let m: Vec<f64> = n.iter().map(|&v| c * (v as f64).powf(0.7)).collect();
            let t = MedianTable::from_medians(ModelKind::Discrete, 1, 1.0, n.clone(), m);
            let e = fit_theta(&t, 1000, 0).unwrap();
            assert!((e.theta_hat - 0.7).abs() < 1e-12);
            assert_eq!(e.ci_low, e.theta_hat);
        }
    }

    #[test]
    fn continuous_tables_fit_n_times_median() {
        let n = powers();
        let m: Vec<f64> = n.iter().map(|&v| (v as f64).powf(-0.4)).collect();
        let t = MedianTable::from_medians(ModelKind::Continuous, 1, 1.0, n, m);
        assert!((fit_theta(&t, 0, 0).unwrap().theta_hat - 0.6).abs() < 1e-12);
    }

    #[test]
    fn degenerate_tables_fail() {
        let n = powers();
        let t = MedianTable::from_medians(ModelKind::Discrete, 1, 1.0, n.clone(), vec![5.0; n.len()]);
        assert!(matches!(fit_theta(&t, 0, 0), Err(Error::FitFailure(_))));
        let t = MedianTable::from_medians(ModelKind::Discrete, 1, 1.0, vec![8, 9, 10, 11], vec![1.0, 2.0, 3.0, 4.0]);
        assert!(fit_theta(&t, 0, 0).is_err());
        let t = MedianTable::from_medians(ModelKind::Discrete, 1, 1.0, vec![1, 16], vec![1.0, 2.0]);
        assert!(fit_theta(&t, 0, 0).is_err());
    }

    #[test]
    fn discrete_medians_are_reproducible_and_bounded() {
        let params = ModelParams::discrete(1, 0.5, 11).unwrap();
        let a = estimate_medians(&params, &[4, 8, 16], 20, ModelKind::Discrete).unwrap();
        let b = estimate_medians(&params, &[4, 8, 16], 20, ModelKind::Discrete).unwrap();
        assert_eq!(a, b);
        for (m, n) in a.medians.iter().zip(&a.n_values) {
            assert!(*m >= 1.0 && *m <= *n as f64);
        }
    }

    #[test]
    fn coupling_never_increases_distances() {
        let (tables, violations) = coupled_discrete(2, &[0.2, 1.0, 3.0], &[2, 4, 8], 10, 5).unwrap();
        assert_eq!(violations, 0);
        assert_eq!(tables.len(), 3);
        let (_, violations) = coupled_continuous(1, &[0.2, 2.0], &[2, 4, 8], 10, 5, 2.0).unwrap();
        assert_eq!(violations, 0);
    }
}
