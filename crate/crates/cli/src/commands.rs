use std::path::Path;

use lrp_core::estimators::{
    c_hat, estimate_medians, fit_theta, hop_count_mc, path_count_mc, sample_diameters,
    scaling_ks_test, tail_report, theta_monotonicity, ModelKind,
};
use lrp_core::metric::{bfs_distance, bfs_geodesic, continuous_ball_field, continuous_distance, DistanceField};
use lrp_core::sampler::{sample_continuous, sample_discrete};
use lrp_core::{derive_stream, LatticeBox, ModelParams, PathTrace, Point, Window};
use serde::Serialize;

use crate::args::{
    parse_lattice_point, parse_point, parse_ranges, BallArgs, Command, DiamArgs, DistArgs,
    EstimateArgs, EstimateKind, GeodesicArgs, ModelArg, SampleArgs, VerifyArgs,
};
use crate::error::{CliError, Result};
use crate::figures;
use crate::formats::{
    axis_columns, csv_bytes, encode_raster, encode_sample, fmt_f64, read_sample, with_suffix,
    RasterMeta, Sample,
};
use crate::manifest::{manifest_path, Recorder};
use crate::verify::run_suite;

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Sample(a) => sample(&a),
        Command::Dist(a) => dist(&a),
        Command::Geodesic(a) => geodesic(&a),
        Command::Ball(a) => ball(&a),
        Command::Diam(a) => diam(&a),
        Command::Estimate(a) => estimate(&a),
        Command::Verify(a) => verify(&a),
        Command::Figures(a) => figures::run(&a),
    }
}

pub(crate) fn params_json<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

pub(crate) fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}

fn window_from(spec: &str, d: usize) -> Result<Window> {
    let r = parse_ranges::<f64>(spec, d)?;
    let lo = Point::new(r.iter().map(|x| x.0).collect())?;
    let hi = Point::new(r.iter().map(|x| x.1).collect())?;
    Ok(Window::new(lo, hi)?)
}

fn box_from(spec: &str, d: usize) -> Result<LatticeBox> {
    let r = parse_ranges::<i64>(spec, d)?;
    Ok(LatticeBox::new(r.iter().map(|x| x.0).collect(), r.iter().map(|x| x.1).collect())?)
}

pub fn sample(a: &SampleArgs) -> Result<()> {
    // Validates every flag, including the scope range, whichever model is drawn.
    let params = ModelParams::new(a.d, a.beta, a.delta, a.delta_max, a.seed)?;
    let stream = derive_stream(a.seed, "cli/sample");
    let sample = match a.model {
        ModelArg::Continuous => {
            let spec = a
                .window
                .as_deref()
                .ok_or_else(|| CliError::Usage("--window is required for the continuous model".into()))?;
            Sample::Continuous(sample_continuous(&params, &window_from(spec, a.d)?, &stream)?)
        }
        ModelArg::Discrete => {
            let spec = a
                .lattice_box
                .as_deref()
                .ok_or_else(|| CliError::Usage("--box is required for the discrete model".into()))?;
            let params = ModelParams::discrete(a.d, a.beta, a.seed)?;
            Sample::Lattice(sample_discrete(&params, &box_from(spec, a.d)?, &stream)?)
        }
    };
    let mut rec = Recorder::new("sample", params_json(a), Some(a.seed));
    rec.write(&a.out, &encode_sample(&sample))?;
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

/// One distance query answered on a sample.
struct Answer {
    value: f64,
    trace: PathTrace,
    from: Vec<f64>,
    to: Vec<f64>,
}

fn continuous_point(s: &str, window: &Window) -> Result<Point> {
    let p = Point::new(parse_point(s)?)?;
    if p.dim() != window.dim() || !window.contains(&p) {
        return Err(CliError::Usage(format!("query point {s} is outside the sample window")));
    }
    Ok(p)
}

fn lattice_point(s: &str, b: &LatticeBox) -> Result<Vec<i64>> {
    let p = parse_lattice_point(s)?;
    if p.len() != b.dim() || !b.contains(&p) {
        return Err(CliError::Usage(format!("query vertex {s} is outside the sample box")));
    }
    Ok(p)
}

fn query(sample: &Sample, from: &str, to: &str) -> Result<Answer> {
    match sample {
        Sample::Continuous(cfg) => {
            let x = continuous_point(from, &cfg.window)?;
            let y = continuous_point(to, &cfg.window)?;
            let r = continuous_distance(cfg, &x, &y, &cfg.window)?;
            Ok(Answer {
                value: r.value,
                trace: r.trace,
                from: x.into_coords(),
                to: y.into_coords(),
            })
        }
        Sample::Lattice(g) => {
            let u = lattice_point(from, &g.lattice_box)?;
            let v = lattice_point(to, &g.lattice_box)?;
            let r = bfs_geodesic(g, &u, &v)?;
            Ok(Answer {
                value: r.value,
                trace: r.trace,
                from: u.iter().map(|&c| c as f64).collect(),
                to: v.iter().map(|&c| c as f64).collect(),
            })
        }
    }
}

pub fn dist(a: &DistArgs) -> Result<()> {
    if a.from.len() != a.to.len() {
        return Err(CliError::Usage(format!(
            "{} --from points but {} --to points",
            a.from.len(),
            a.to.len()
        )));
    }
    let sample = read_sample(&a.input)?;
    let d = sample.dim();
    let mut header = axis_columns("x", d);
    header.extend(axis_columns("y", d));
    header.extend(["distance".to_owned(), "hops".to_owned()]);
    let rows = a
        .from
        .iter()
        .zip(&a.to)
        .map(|(f, t)| {
            let ans = query(&sample, f, t)?;
            let mut row: Vec<String> = ans.from.iter().chain(&ans.to).map(|&v| fmt_f64(v)).collect();
            row.push(fmt_f64(ans.value));
            row.push(ans.trace.hop_count.to_string());
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rec = Recorder::new("dist", params_json(a), Some(sample.params().seed));
    rec.write(&a.out, &csv_bytes(&header, &rows))?;
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

/// Trace as CSV: one row per node, with `time` the gap length travelled so
/// far and `hop` set when the node was reached through a long edge.
pub fn trace_csv(trace: &PathTrace) -> Vec<u8> {
    let d = trace.start().dim();
    let mut header = vec!["step".to_owned(), "time".to_owned()];
    header.extend(axis_columns("x", d));
    header.push("hop".to_owned());
    let mut time = 0.0;
    let mut rows = Vec::with_capacity(trace.nodes.len());
    for (i, node) in trace.nodes.iter().enumerate() {
        let hop = if i == 0 {
            false
        } else {
            let h = trace.hop_flags[i - 1];
            if !h {
                time += trace.nodes[i - 1].dist(node);
            }
            h
        };
        let mut row = vec![i.to_string(), fmt_f64(time)];
        row.extend(node.coords().iter().map(|&c| fmt_f64(c)));
        row.push((hop as u8).to_string());
        rows.push(row);
    }
    csv_bytes(&header, &rows)
}

pub fn geodesic(a: &GeodesicArgs) -> Result<()> {
    let sample = read_sample(&a.input)?;
    let ans = query(&sample, &a.from, &a.to)?;
    let mut rec = Recorder::new("geodesic", params_json(a), Some(sample.params().seed));
    rec.write(&a.out, &trace_csv(&ans.trace))?;
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

/// Raster bytes and sidecar for a distance field.
pub fn raster_files(field: &DistanceField, params: &ModelParams) -> (Vec<u8>, Vec<u8>) {
    use lrp_core::metric::FieldDomain;
    let (domain, shape, lo, hi, resolution) = match &field.domain {
        FieldDomain::Lattice(b) => (
            "lattice",
            (0..b.dim()).map(|k| b.extent(k)).collect(),
            b.lo.iter().map(|&v| v as f64).collect(),
            b.hi.iter().map(|&v| v as f64).collect(),
            1.0,
        ),
        FieldDomain::Grid {
            window,
            resolution,
            shape,
        } => (
            "grid",
            shape.clone(),
            window.lo.coords().to_vec(),
            window.hi.coords().to_vec(),
            *resolution,
        ),
    };
    let meta = RasterMeta {
        format: "f32le".into(),
        shape,
        order: "row-major, last axis fastest".into(),
        domain: domain.into(),
        lo,
        hi,
        resolution,
        source: field.source.coords().to_vec(),
        params: params.clone(),
        value: "distance".into(),
    };
    (encode_raster(&field.values), json_bytes(&meta))
}

pub fn ball(a: &BallArgs) -> Result<()> {
    let sample = read_sample(&a.input)?;
    let field = match &sample {
        Sample::Continuous(cfg) => {
            let src = continuous_point(&a.source, &cfg.window)?;
            continuous_ball_field(cfg, &src, &cfg.window, a.resolution)?
        }
        Sample::Lattice(g) => bfs_distance(g, &lattice_point(&a.source, &g.lattice_box)?)?,
    };
    let (raster, sidecar) = raster_files(&field, sample.params());
    let mut rec = Recorder::new("ball", params_json(a), Some(sample.params().seed));
    rec.write(&a.out, &raster)?;
    rec.write(&with_suffix(&a.out, ".json"), &sidecar)?;
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

pub fn default_n_schedule(n_max: u64) -> Vec<u64> {
    (0..63).map(|k| 1u64 << k).take_while(|&n| n <= n_max).collect()
}

/// Long-format diameter table `beta,n,diam`.
pub fn diameter_csv(betas: &[f64], n_values: &[u64], curves: &[Vec<u32>]) -> Vec<u8> {
    let header = ["beta", "n", "diam"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = betas
        .iter()
        .zip(curves)
        .flat_map(|(b, c)| {
            n_values
                .iter()
                .zip(c)
                .map(move |(n, v)| vec![fmt_f64(*b), n.to_string(), v.to_string()])
        })
        .collect();
    csv_bytes(&header, &rows)
}

pub fn diam(a: &DiamArgs) -> Result<()> {
    let n_values = if a.n_values.is_empty() {
        default_n_schedule(4096.min(a.half_width.max(0) as u64))
    } else {
        a.n_values.clone()
    };
    let curves =
        lrp_core::estimators::coupled_diameters(a.d, &a.betas, a.half_width, &n_values, a.seed)?;
    let mut rec = Recorder::new("diam", params_json(a), Some(a.seed));
    rec.write(&a.out, &diameter_csv(&a.betas, &n_values, &curves))?;
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

fn estimate_report(a: &EstimateArgs) -> Result<serde_json::Value> {
    let beta = a.betas[0];
    let discrete = || ModelParams::discrete(a.d, beta, a.seed);
    let continuous = || ModelParams::new(a.d, beta, 1.0, f64::INFINITY, a.seed);
    let kind = match a.model {
        ModelArg::Discrete => ModelKind::Discrete,
        ModelArg::Continuous => ModelKind::Continuous,
    };
    let value = match a.kind {
        EstimateKind::Medians => {
            let params = if kind == ModelKind::Discrete { discrete()? } else { continuous()? };
            let table = estimate_medians(&params, &a.n_values, a.replicates, kind)?;
            let fit = fit_theta(&table, a.resamples, a.seed)?;
            serde_json::json!({ "table": table, "fit": fit })
        }
        EstimateKind::Theta if a.betas.len() >= 2 => params_json(&theta_monotonicity(
            a.d,
            &a.betas,
            &a.n_values,
            a.replicates,
            a.resamples,
            a.seed,
        )?),
        EstimateKind::Theta => {
            let table = estimate_medians(&discrete()?, &a.n_values, a.replicates, ModelKind::Discrete)?;
            let fit = fit_theta(&table, a.resamples, a.seed)?;
            serde_json::json!({ "estimates": [fit], "tables": [table] })
        }
        EstimateKind::Tails => {
            let samples = sample_diameters(&discrete()?, &a.n_values, a.replicates)?;
            let theta = match a.theta {
                Some(t) => t,
                None => fit_theta(&samples.table, a.resamples, a.seed)?.theta_hat,
            };
            params_json(&tail_report(&samples, a.eta, theta)?)
        }
        EstimateKind::Paths => params_json(&path_count_mc(
            &discrete()?,
            a.m_max,
            a.replicates,
            a.half_width as i64,
        )?),
        EstimateKind::Hops => {
            let params = continuous()?;
            let alpha = 2.0 * c_hat(&params);
            params_json(&hop_count_mc(&params, a.t, a.replicates, a.half_width, &[alpha])?)
        }
        EstimateKind::Scaling => {
            params_json(&scaling_ks_test(&continuous()?, a.scale, a.replicates, a.exponent)?)
        }
    };
    Ok(value)
}

pub fn estimate(a: &EstimateArgs) -> Result<()> {
    if a.betas.is_empty() {
        return Err(CliError::Usage("at least one --beta is required".into()));
    }
    let report = estimate_report(a)?;
    let mut rec = Recorder::new("estimate", params_json(a), Some(a.seed));
    rec.write(&a.out, &json_bytes(&report))?;
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

pub fn verify(a: &VerifyArgs) -> Result<()> {
    let report = run_suite(a.suite, a.seed)?;
    let mut rec = Recorder::new("verify", params_json(a), Some(a.seed));
    rec.write(&a.out, &json_bytes(&report))?;
    rec.finish(&manifest_path(&a.out))?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}
