//! Verification suites: each check is a deterministic function of the suite
//! seed and reports pass/fail with a short numeric summary.

use lrp_core::estimators::medians::discrete_query_box;
use lrp_core::estimators::{
    estimate_medians, fit_theta, hop_count_mc, ks_two_sample, padding_sensitivity, path_count_mc,
    sample_diameters, scaling_ks_test, tail_report, theta_monotonicity, ModelKind, Verdict,
};
use lrp_core::metric::{
    bfs_distance, brute_force_distance, continuous_distance, continuous_distance_with,
    distance_matrix, internal_distance, oracle_instance, Relaxation, BRUTE_FORCE_MAX_ENDPOINTS,
};
use lrp_core::renorm::{coarse_grain_marginals, coupling_check, CouplingReport};
use lrp_core::sampler::{sample_continuous, sample_discrete, superpose};
use lrp_core::{derive_stream, LatticeBox, LatticeGraph, ModelParams, Point, Stream, Window};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::Suite;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_owned(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Oracle => {
            let mut c = oracle_checks(seed)?;
            c.extend(sampler_checks(seed)?);
            c
        }
        Suite::Axioms => axiom_checks(seed)?,
        Suite::Coupling => {
            let mut c = coupling_checks(seed)?;
            c.extend(coarse_grain_checks(seed)?);
            c
        }
        Suite::Paths => path_checks(seed)?,
        Suite::Hops => hop_checks(seed)?,
        Suite::Scaling => scaling_checks(seed)?,
        Suite::Theta => theta_checks(seed)?,
        Suite::Tails => tail_checks(seed)?,
        Suite::Medians => median_checks(seed)?,
    };
    Ok(SuiteReport {
        suite,
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn uniform_point(rng: &mut Stream, w: &Window) -> Point {
    Point::new(
        (0..w.dim())
            .map(|a| {
                let (lo, hi) = (w.lo.coords()[a], w.hi.coords()[a]);
                lo + (hi - lo) * rng.random::<f64>()
            })
            .collect(),
    )
    .expect("finite coordinates")
}

/// Engine against Floyd–Warshall on 1000 small instances, d = 1 and 2.
pub fn oracle_checks(seed: u64) -> Result<Vec<Check>> {
    let instances = 1000u64;
    let rows: Vec<(f64, usize)> = (0..instances)
        .into_par_iter()
        .map(|i| -> Result<(f64, usize)> {
            let d = 1 + (i % 2) as usize;
            let (cfg, x, y) = oracle_instance(d, seed.wrapping_add(i))?;
            let brute = brute_force_distance(&cfg, &x, &y)?;
            let mut worst = 0.0f64;
            for mode in [Relaxation::Grid, Relaxation::Dense] {
                let v = continuous_distance_with(&cfg, &x, &y, &cfg.window, mode)?.value;
                worst = worst.max((v - brute).abs());
            }
            Ok((worst, 2 * cfg.edges.len()))
        })
        .collect::<Result<_>>()?;
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_ends = rows.iter().map(|r| r.1).max().unwrap_or(0);
    Ok(vec![Check::new(
        "engine equals brute force",
        worst <= 1e-9 && max_ends <= BRUTE_FORCE_MAX_ENDPOINTS,
        format!("{instances} instances, max |diff| = {worst:.3e}, max endpoints = {max_ends}"),
    )])
}

fn within_sigma(emp: f64, expect: f64, var: f64, n: u64, k: f64) -> (bool, f64) {
    let sd = (var / n as f64).sqrt();
    ((emp - expect).abs() <= k * sd, (emp - expect) / sd)
}

/// Binomial and Poisson oracles for the two samplers plus the superposition
/// law, in one dimension.
pub fn sampler_checks(seed: u64) -> Result<Vec<Check>> {
    let n = 100_000u64;
    let lattice = ModelParams::discrete(1, 1.0, seed)?;
    let pair_box = LatticeBox::cube(1, 0, 2)?;
    let hits = (0..n)
        .into_par_iter()
        .map(|s| -> Result<u64> {
            let g = sample_discrete(&lattice, &pair_box, &derive_stream(seed, &format!("oracle/pair/{s}")))?;
            Ok(g.has_long_edge(&[0], &[2]) as u64)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<u64>();
    let freq = hits as f64 / n as f64;
    let (pair_ok, z_pair) = within_sigma(freq, 0.25, 0.25 * 0.75, n, 3.0);

    let params = ModelParams::new(1, 1.0, 1.0, f64::INFINITY, seed)?;
    let window = Window::cube(1, 0.0, 2.0)?;
    let counts: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|s| -> Result<f64> {
            let stream = derive_stream(seed, &format!("oracle/count/{s}"));
            Ok(sample_continuous(&params, &window, &stream)?.edges.len() as f64)
        })
        .collect::<Result<_>>()?;
    let mean = counts.iter().sum::<f64>() / n as f64;
    let expect = 1.0 - 2f64.ln();
    let (count_ok, z_count) = within_sigma(mean, expect, expect, n, 3.0);
    Ok(vec![
        Check::new(
            "lattice pair frequency",
            pair_ok,
            format!("P[<0,2>] = {freq:.5} vs 0.25 over {n} seeds (z = {z_pair:.2})"),
        ),
        Check::new(
            "continuous edge count mean",
            count_ok,
            format!("mean = {mean:.5} vs 1 - ln 2 = {expect:.5} over {n} seeds (z = {z_count:.2})"),
        ),
        superposition_check(seed)?,
    ])
}

fn superposition_check(seed: u64) -> Result<Check> {
    let n = 10_000u64;
    let w = Window::cube(2, 0.0, 3.0)?;
    let base = ModelParams::new(2, 0.4, 0.5, f64::INFINITY, seed)?;
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|s| -> Result<(f64, f64)> {
            let c = sample_continuous(&base, &w, &derive_stream(seed, &format!("oracle/sup/{s}")))?;
            let up = superpose(&c, 0.9, &derive_stream(seed, &format!("oracle/sup-extra/{s}")))?;
            let direct = sample_continuous(
                &base.with_beta(1.3),
                &w,
                &derive_stream(seed, &format!("oracle/direct/{s}")),
            )?;
            Ok((up.edges.len() as f64, direct.edges.len() as f64))
        })
        .collect::<Result<_>>()?;
    let (sup, dir): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let ks = ks_two_sample(&sup, &dir)?;
    Ok(Check::new(
        "superposition law",
        ks.p_value > 0.01,
        format!("KS D = {:.4}, p = {:.4} over {n} seeds", ks.statistic, ks.p_value),
    ))
}

#[derive(Default)]
struct AxiomTally {
    triples: u64,
    pairs: u64,
    symmetry: u64,
    triangle: u64,
    upper: u64,
    zero_edges: u64,
    zero_failures: u64,
    monotone: u64,
    monotone_failures: u64,
}

/// Metric axioms and monotone couplings on 20 sampled configurations, each
/// with 101 query points: 10201 ordered pairs and all their triples.
pub fn axiom_checks(seed: u64) -> Result<Vec<Check>> {
    let tallies: Vec<AxiomTally> = (0..20u64)
        .into_par_iter()
        .map(|c| -> Result<AxiomTally> {
            let d = 1 + (c % 2) as usize;
            let side = if d == 1 { 200.0 } else { 40.0 };
            let beta = [0.5, 1.0, 2.0][(c % 3) as usize];
            let w = Window::cube(d, 0.0, side)?;
            let params = ModelParams::new(d, beta, 1.0, f64::INFINITY, seed)?;
            let stream = derive_stream(seed, &format!("axioms/config/{c}"));
            let cfg = sample_continuous(&params, &w, &stream.split("sample"))?;
            let mut rng = stream.split("points");
            let mut pts: Vec<Point> = (0..99).map(|_| uniform_point(&mut rng, &w)).collect();
            pts.extend(cfg.edges.iter().take(2).flat_map(|e| [e.a.clone(), e.b.clone()]));
            let m = distance_matrix(&cfg, &pts, &w)?;
            let mut t = AxiomTally::default();
            let k = pts.len();
            for i in 0..k {
                for j in 0..k {
                    t.pairs += 1;
                    if (m[i][j] - m[j][i]).abs() > 1e-12 {
                        t.symmetry += 1;
                    }
                    if m[i][j] > pts[i].dist(&pts[j]) + 1e-12 {
                        t.upper += 1;
                    }
                    for l in 0..k {
                        t.triples += 1;
                        if m[i][l] > m[i][j] + m[j][l] + 1e-9 {
                            t.triangle += 1;
                        }
                    }
                }
            }
            for e in cfg.edges.iter().take(20) {
                t.zero_edges += 1;
                if continuous_distance(&cfg, &e.a, &e.b, &w)?.value != 0.0 {
                    t.zero_failures += 1;
                }
            }
            let more = superpose(&cfg, 0.5, &stream.split("extra"))?;
            let scoped = cfg.restricted_scope(2.0, f64::INFINITY)?;
            let sub = w.shrunk(0.5);
            for _ in 0..20 {
                let x = uniform_point(&mut rng, &sub);
                let y = uniform_point(&mut rng, &sub);
                let base = continuous_distance(&cfg, &x, &y, &w)?.value;
                let ok = continuous_distance(&more, &x, &y, &w)?.value <= base + 1e-12
                    && continuous_distance(&scoped, &x, &y, &w)?.value >= base - 1e-12
                    && internal_distance(&cfg, &x, &y, &sub)?.value >= base - 1e-12;
                t.monotone += 1;
                if !ok {
                    t.monotone_failures += 1;
                }
            }
            Ok(t)
        })
        .collect::<Result<_>>()?;
    let sum = |f: fn(&AxiomTally) -> u64| tallies.iter().map(f).sum::<u64>();
    let triples = sum(|t| t.triples);
    let pairs = sum(|t| t.pairs);
    let min_pairs = tallies.iter().map(|t| t.pairs).min().unwrap_or(0);
    Ok(vec![
        Check::new(
            "symmetry",
            sum(|t| t.symmetry) == 0,
            format!("{} violations over {pairs} pairs", sum(|t| t.symmetry)),
        ),
        Check::new(
            "triangle inequality",
            sum(|t| t.triangle) == 0 && min_pairs >= 10_000,
            format!(
                "{} violations over {triples} triples ({min_pairs} pairs per configuration at least)",
                sum(|t| t.triangle)
            ),
        ),
        Check::new(
            "euclidean upper bound",
            sum(|t| t.upper) == 0,
            format!("{} violations over {pairs} pairs", sum(|t| t.upper)),
        ),
        Check::new(
            "zero distance along edges",
            sum(|t| t.zero_failures) == 0,
            format!("{} failures over {} edges", sum(|t| t.zero_failures), sum(|t| t.zero_edges)),
        ),
        Check::new(
            "monotone couplings",
            sum(|t| t.monotone_failures) == 0,
            format!(
                "{} failures over {} queries (superposition, scope, sub-window)",
                sum(|t| t.monotone_failures),
                sum(|t| t.monotone)
            ),
        ),
    ])
}

fn coupling_run(d: usize, side: f64, seed: u64) -> Result<CouplingReport> {
    let reports: Vec<CouplingReport> = (0..100u64)
        .into_par_iter()
        .map(|s| -> Result<CouplingReport> {
            let params = ModelParams::new(d, 1.0, 1.0, f64::INFINITY, seed)?;
            let w = Window::cube(d, 0.0, side)?;
            let stream = derive_stream(seed, &format!("coupling/d{d}/{s}"));
            let cfg = sample_continuous(&params, &w, &stream.split("sample"))?;
            let core = w.shrunk(0.5);
            let mut rng = stream.split("pairs");
            let pairs: Vec<(Point, Point)> = (0..100)
                .map(|_| (uniform_point(&mut rng, &core), uniform_point(&mut rng, &core)))
                .collect();
            Ok(coupling_check(&cfg, 1.0, &pairs)?)
        })
        .collect::<Result<_>>()?;
    let mut total = CouplingReport {
        max_reverse_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut hop_sum = 0.0;
    for r in &reports {
        total.pairs_tested += r.pairs_tested;
        total.forward_violations += r.forward_violations;
        total.reverse_violations += r.reverse_violations;
        total.same_cell_wide += r.same_cell_wide;
        total.skeleton_failures += r.skeleton_failures;
        total.max_hops = total.max_hops.max(r.max_hops);
        total.max_forward_ratio = total.max_forward_ratio.max(r.max_forward_ratio);
        total.max_reverse_excess = total.max_reverse_excess.max(r.max_reverse_excess);
        hop_sum += r.mean_hops * r.pairs_tested as f64;
    }
    total.mean_hops = hop_sum / total.pairs_tested.max(1) as f64;
    Ok(total)
}

/// Forward and reverse comparison inequalities, 100 samples x 100 core
/// pairs in each of d = 1, 2.
pub fn coupling_checks(seed: u64) -> Result<Vec<Check>> {
    [(1usize, 256.0), (2, 32.0)]
        .into_iter()
        .map(|(d, side)| {
            let r = coupling_run(d, side, seed)?;
            Ok(Check::new(
                &format!("coupling inequalities d={d}"),
                r.passed(),
                format!(
                    "{} pairs: {} forward, {} reverse, {} skeleton failures; \
                     max d/(3d d_hat+1) = {:.3}, max reverse excess = {:.3}, mean hops = {:.2}",
                    r.pairs_tested,
                    r.forward_violations,
                    r.reverse_violations,
                    r.skeleton_failures,
                    r.max_forward_ratio,
                    r.max_reverse_excess,
                    r.mean_hops
                ),
            ))
        })
        .collect()
}

/// Coarse-grained edge marginals against the lattice probabilities, d = 2.
pub fn coarse_grain_checks(seed: u64) -> Result<Vec<Check>> {
    let r = coarse_grain_marginals(2, 1.0, 9, 8.0, 10_000, seed)?;
    let worst = r.orbits.iter().map(|o| o.z.abs()).fold(0.0, f64::max);
    Ok(vec![Check::new(
        "coarse-grained marginals",
        r.p_value > 0.01,
        format!(
            "chi2 = {:.2} on {} orbits, p = {:.4}, max |z| = {worst:.2}, {} samples",
            r.chi_square, r.dof, r.p_value, r.samples
        ),
    )])
}

/// Self-avoiding path recursion, d = 1, beta in {0.5, 1}.
pub fn path_checks(seed: u64) -> Result<Vec<Check>> {
    [0.5, 1.0]
        .into_iter()
        .map(|beta| {
            let r = path_count_mc(&ModelParams::discrete(1, beta, seed)?, 6, 2000, 64)?;
            let worst = r
                .recursion_excess
                .iter()
                .map(|(m, se)| m / se.max(f64::MIN_POSITIVE))
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(Check::new(
                &format!("path recursion beta={beta}"),
                r.recursion_holds && r.mean_counts[0] == 1.0,
                format!(
                    "C_dis = {:.4}, E|P_k| = {:?}, max excess/se = {worst:.2}",
                    r.branching_constant,
                    r.mean_counts.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>()
                ),
            ))
        })
        .collect()
}

/// Hop-class counts against `e^{c_hat t}` for t = 1..4, and the hop tail at
/// `alpha = 2 c_hat`, d = 1, beta = 0.5. The class count grows like
/// `e^{c_hat t}` with `c_hat = 4 beta`, which fixes the affordable beta.
pub fn hop_checks(seed: u64) -> Result<Vec<Check>> {
    let params = ModelParams::new(1, 0.5, 1.0, f64::INFINITY, seed)?;
    let alpha = 2.0 * lrp_core::estimators::c_hat(&params);
    let reps = 1000usize;
    let mut checks = Vec::new();
    for t in [1.0, 2.0, 3.0, 4.0] {
        let r = hop_count_mc(&params, t, reps, 512.0, &[alpha])?;
        let (_, emp, bound) = r.hop_tail[0];
        let tail_ok = emp <= bound + 3.0 * (bound.max(1.0 / reps as f64) / reps as f64).sqrt();
        checks.push(Check::new(
            &format!("hop classes t={t}"),
            r.bound_holds && tail_ok,
            format!(
                "E|P_t| = {:.3} (se {:.3}) vs e^(c t) = {:.3}; tail at alpha = {alpha:.1}: {emp:.4} vs {bound:.3e}",
                r.mean_classes, r.std_error, r.class_bound
            ),
        ));
    }
    Ok(checks)
}

/// Scaling identity in law at n = 8, with a deliberately wrong exponent as
/// a power check.
pub fn scaling_checks(seed: u64) -> Result<Vec<Check>> {
    let params = ModelParams::new(1, 1.0, 1.0, f64::INFINITY, seed)?;
    let good = scaling_ks_test(&params, 8.0, 500, 1.0)?;
    let bad = scaling_ks_test(&params, 8.0, 500, 0.5)?;
    Ok(vec![
        Check::new(
            "scaling invariance",
            good.ks.p_value > 0.01,
            format!("KS D = {:.4}, p = {:.4}", good.ks.statistic, good.ks.p_value),
        ),
        Check::new(
            "scaling power check",
            bad.ks.p_value < 0.001,
            format!("exponent 0.5: KS D = {:.4}, p = {:.3e}", bad.ks.statistic, bad.ks.p_value),
        ),
    ])
}

/// Exponent fits at beta = 0.1 and 5 in d = 1 on coupled samples.
pub fn theta_checks(seed: u64) -> Result<Vec<Check>> {
    let ns: Vec<u64> = (6..=13).map(|k| 1u64 << k).collect();
    let r = theta_monotonicity(1, &[0.1, 5.0], &ns, 200, 1000, seed)?;
    let (lo, hi) = (&r.estimates[0], &r.estimates[1]);
    Ok(vec![
        Check::new(
            "small-beta exponent",
            (0.8..1.0).contains(&lo.theta_hat),
            format!(
                "theta(0.1) = {:.4} [{:.4}, {:.4}], R^2 = {:.4}",
                lo.theta_hat, lo.ci_low, lo.ci_high, lo.r_squared
            ),
        ),
        Check::new(
            "exponent decreasing in beta",
            r.verdicts[0].2 == Verdict::Decreasing,
            format!(
                "theta(5) = {:.4} [{:.4}, {:.4}]; verdict {:?}",
                hi.theta_hat, hi.ci_low, hi.ci_high, r.verdicts[0].2
            ),
        ),
        Check::new(
            "coupled distances ordered",
            r.coupled_violations == 0,
            format!("{} per-sample violations", r.coupled_violations),
        ),
    ])
}

/// Diameter MGF stability at eta = 1, d = 1, beta = 1, with the exponent
/// fitted from the diameter medians themselves.
pub fn tail_checks(seed: u64) -> Result<Vec<Check>> {
    let ns: Vec<u64> = (6..=10).map(|k| 1u64 << k).collect();
    let samples = sample_diameters(&ModelParams::discrete(1, 1.0, seed)?, &ns, 200)?;
    let fit = fit_theta(&samples.table, 1000, seed)?;
    let r = tail_report(&samples, 1.0, fit.theta_hat)?;
    let over = tail_report(&samples, 1.0, (fit.theta_hat + 0.2).min(0.99))?;
    Ok(vec![
        Check::new(
            "diameter tail stability",
            !r.overflowed && r.stability_ratio <= 3.0,
            format!(
                "theta = {:.4}, E exp(diam/n^theta) = {:?}, ratio = {:.3}",
                fit.theta_hat,
                r.mgf.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
                r.stability_ratio
            ),
        ),
        Check::new(
            "diameter dominates corner distance",
            r.lower_bound_violations == 0,
            format!("{} violations", r.lower_bound_violations),
        ),
        Check::new(
            "over-normalized tail decreases",
            over.mgf.last() < over.mgf.first(),
            format!("theta + 0.2: {:?}", over.mgf.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()),
        ),
    ])
}

/// Median tables: reproducibility, monotonicity, the taxicab limit and the
/// padding policy.
pub fn median_checks(seed: u64) -> Result<Vec<Check>> {
    let ns: Vec<u64> = (4..=9).map(|k| 1u64 << k).collect();
    let params = ModelParams::discrete(1, 1.0, seed)?;
    let a = estimate_medians(&params, &ns, 100, ModelKind::Discrete)?;
    let b = estimate_medians(&params, &ns, 100, ModelKind::Discrete)?;
    let mut taxicab_ok = true;
    for d in 1..=2usize {
        for &n in &[4u64, 16, 64] {
            let g = LatticeGraph::without_long_edges(discrete_query_box(d, n)?, ModelParams::discrete(d, 1.0, seed)?);
            let f = bfs_distance(&g, &vec![0; d])?;
            let idx = g.lattice_box.index(&vec![n as i64; d]).expect("corner in box");
            taxicab_ok &= f.values[idx] == (n as usize * d) as f64;
        }
    }
    let cont = ModelParams::new(1, 1.0, 1.0, f64::INFINITY, seed)?;
    let pad = padding_sensitivity(&cont, &[4, 8, 16, 32], 400)?;
    Ok(vec![
        Check::new("medians reproducible", a == b, "two runs compared".into()),
        Check::new(
            "medians nondecreasing",
            a.is_nondecreasing(),
            format!("{:?}", a.medians),
        ),
        Check::new("taxicab without edges", taxicab_ok, "d = 1, 2; n = 4, 16, 64".into()),
        Check::new(
            "padding sensitivity",
            pad.accepted,
            format!("max relative shift {:.4}", pad.max_relative_shift),
        ),
    ])
}
