use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lrp_cli::formats::{read_sample, write_sample, RasterMeta, Sample};
use lrp_cli::manifest::RunManifest;
use lrp_core::{LatticeBox, LatticeGraph, ModelParams};

fn lrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    lrp(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn manifest(out: &Path) -> RunManifest {
    let mut m = out.as_os_str().to_owned();
    m.push(".manifest.json");
    serde_json::from_slice(&std::fs::read(PathBuf::from(m)).unwrap()).unwrap()
}

#[test]
fn sample_writes_file_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.lrp");
    let args = [
        "sample", "--model", "continuous", "--d", "1", "--beta", "1", "--delta", "1", "--window", "0:2",
        "--seed", "7", "--out", p(&out),
    ];
    assert_eq!(code(&args), 0);
    let Sample::Continuous(cfg) = read_sample(&out).unwrap() else { panic!("expected edges") };
    assert_eq!(cfg.params.seed, 7);
    assert_eq!(cfg.window.hi.coords(), &[2.0]);
    let m = manifest(&out);
    assert_eq!(m.command, "sample");
    assert_eq!(m.seed, Some(7));
    assert_eq!(m.outputs.len(), 1);
    assert_eq!(m.outputs[0].bytes, std::fs::metadata(&out).unwrap().len());
    assert_eq!(m.parameters["window"], "0:2");
}

#[test]
fn sampled_counts_have_the_unit_interval_mean() {
    // Edge counts on [0, 2] with beta = 1, delta = 1 are Poisson(1 - ln 2).
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.lrp");
    let n = 1500;
    let mut counts = Vec::with_capacity(n);
    for seed in 0..n {
        let seed = seed.to_string();
        let status = lrp_cli::run([
            "lrp", "sample", "--model", "continuous", "--beta", "1", "--window", "0:2", "--seed", &seed,
            "--out", p(&out),
        ]);
        assert_eq!(status, 0);
        let Sample::Continuous(cfg) = read_sample(&out).unwrap() else { unreachable!() };
        counts.push(cfg.edges.len() as f64);
    }
    let mean = counts.iter().sum::<f64>() / n as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let expect = 1.0 - 2f64.ln();
    assert!((mean - expect).abs() <= 4.0 * (expect / n as f64).sqrt(), "mean {mean}");
    assert!((var / mean - 1.0).abs() < 0.2, "dispersion {}", var / mean);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = p(&out);
    let cont = ["sample", "--model", "continuous", "--beta", "1", "--window", "0:2", "--out", o];
    assert_eq!(code(&[&cont[..], &["--delta", "0"]].concat()), 2);
    assert_eq!(code(&[&cont[..], &["--delta", "2", "--delta-max", "1"]].concat()), 2);
    assert_eq!(code(&["sample", "--model", "continuous", "--beta", "1", "--out", o]), 2);
    assert_eq!(code(&["sample", "--model", "discrete", "--beta", "-1", "--box", "0:4", "--out", o]), 2);
    assert_eq!(code(&["sample", "--model", "discrete", "--beta", "1", "--box", "0:4,0:4", "--out", o]), 2);
    assert_eq!(code(&["verify", "nonsense", "--out", o]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["dist", "--input", p(&dir.path().join("missing")), "--from", "0", "--to", "1", "--out", o]), 2);
    assert!(!out.exists(), "failed commands leave no output");
}

#[test]
fn oversized_requests_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("big");
    let args = ["sample", "--model", "discrete", "--d", "2", "--beta", "1", "--box", "0:100000", "--out", p(&out)];
    let o = lrp(&args);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn queries_outside_the_sample_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.lrp");
    let args = ["sample", "--model", "continuous", "--beta", "1", "--window", "0:10", "--out", p(&s)];
    assert_eq!(code(&args), 0);
    let out = dir.path().join("d.csv");
    assert_eq!(code(&["dist", "--input", p(&s), "--from", "1", "--to", "11", "--out", p(&out)]), 2);
    assert_eq!(code(&["dist", "--input", p(&s), "--from", "1,2", "--to", "3", "--out", p(&out)]), 2);
    assert_eq!(code(&["dist", "--input", p(&s), "--from", "1", "--from", "2", "--to", "3", "--out", p(&out)]), 2);
    assert_eq!(code(&["ball", "--input", p(&s), "--source", "-1", "--out", p(&out)]), 2);
}

#[test]
fn empty_lattice_distances_are_taxicab() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("empty.lrp");
    let g = LatticeGraph::without_long_edges(
        LatticeBox::cube(2, -10, 10).unwrap(),
        ModelParams::discrete(2, 1.0, 0).unwrap(),
    );
    write_sample(&s, &Sample::Lattice(g)).unwrap();
    let out = dir.path().join("d.csv");
    let args = [
        "dist", "--input", p(&s), "--from", "0,0", "--to", "3,-4", "--from", "-10,-10", "--to", "10,10",
        "--out", p(&out),
    ];
    assert_eq!(code(&args), 0);
    let header = std::fs::read_to_string(&out).unwrap().lines().next().unwrap().to_owned();
    assert_eq!(header, "x0,x1,y0,y1,distance,hops");
    let rows = csv(&out);
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), 7.0);
    assert_eq!(rows[1][4].parse::<f64>().unwrap(), 40.0);
    assert!(rows.iter().all(|r| r[5] == "0"));
}

#[test]
fn geodesic_time_is_cumulative_gap_length() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.lrp");
    let args = ["sample", "--model", "continuous", "--d", "2", "--beta", "2", "--window", "0:30", "--seed", "3", "--out", p(&s)];
    assert_eq!(code(&args), 0);
    let d = dir.path().join("d.csv");
    let g = dir.path().join("g.csv");
    assert_eq!(code(&["dist", "--input", p(&s), "--from", "5,5", "--to", "25,20", "--out", p(&d)]), 0);
    assert_eq!(code(&["geodesic", "--input", p(&s), "--from", "5,5", "--to", "25,20", "--out", p(&g)]), 0);
    let dist = csv(&d)[0][4].parse::<f64>().unwrap();
    let hops: usize = csv(&d)[0][5].parse().unwrap();
    let trace = csv(&g);
    assert_eq!(trace.first().unwrap()[2..4], ["5", "5"].map(|v| lrp_cli::formats::fmt_f64(v.parse().unwrap())));
    let time: f64 = trace.last().unwrap()[1].parse().unwrap();
    assert!((time - dist).abs() < 1e-9, "{time} vs {dist}");
    assert_eq!(trace.iter().filter(|r| r[4] == "1").count(), hops);
    let times: Vec<f64> = trace.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn ball_rasters_match_their_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.lrp");
    assert_eq!(code(&["sample", "--model", "discrete", "--d", "2", "--beta", "0.5", "--box", "-20:20,-10:10", "--out", p(&s)]), 0);
    let r = dir.path().join("b.f32");
    assert_eq!(code(&["ball", "--input", p(&s), "--source", "0,0", "--out", p(&r)]), 0);
    let meta: RasterMeta =
        serde_json::from_slice(&std::fs::read(dir.path().join("b.f32.json")).unwrap()).unwrap();
    assert_eq!(meta.shape, vec![41, 21]);
    assert_eq!(meta.domain, "lattice");
    let values = lrp_cli::formats::decode_raster(&r, &std::fs::read(&r).unwrap()).unwrap();
    assert_eq!(values.len(), 41 * 21);
    // source (0, 0) sits at row 20, column 10
    assert_eq!(values[20 * 21 + 10], 0.0);
    assert!(values.iter().all(|v| *v >= 0.0 && *v <= 30.0));
    assert_eq!(manifest(&r).outputs.len(), 2);

    let c = dir.path().join("c.lrp");
    assert_eq!(code(&["sample", "--model", "continuous", "--d", "2", "--beta", "1", "--window", "0:8", "--out", p(&c)]), 0);
    assert_eq!(code(&["ball", "--input", p(&c), "--source", "4,4", "--resolution", "0.5", "--out", p(&r)]), 0);
    let meta: RasterMeta =
        serde_json::from_slice(&std::fs::read(dir.path().join("b.f32.json")).unwrap()).unwrap();
    assert_eq!((meta.shape, meta.domain.as_str()), (vec![16, 16], "grid"));
}

#[test]
fn diameters_grow_with_n_and_shrink_with_beta() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("diam.csv");
    let args = ["diam", "--beta", "0.1", "--beta", "5", "--half-width", "2000", "--n", "8,32,128,512", "--out", p(&out)];
    assert_eq!(code(&args), 0);
    let rows = csv(&out);
    assert_eq!(rows.len(), 8);
    let curve = |b: usize| rows[4 * b..4 * b + 4].iter().map(|r| r[2].parse::<u32>().unwrap()).collect::<Vec<_>>();
    let (lo, hi) = (curve(0), curve(1));
    assert!(lo.windows(2).all(|w| w[0] <= w[1]) && hi.windows(2).all(|w| w[0] <= w[1]));
    assert!(lo.iter().zip(&hi).all(|(a, b)| b <= a));
    assert_eq!(code(&["diam", "--beta", "5", "--beta", "1", "--half-width", "100", "--out", p(&out)]), 2);
}

#[test]
fn estimates_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.json");
    let args = ["estimate", "medians", "--n", "4,8,16,32", "--replicates", "20", "--resamples", "50", "--out", p(&out)];
    assert_eq!(code(&args), 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["table"]["medians"].as_array().unwrap().len(), 4);
    assert!(v["fit"]["theta_hat"].as_f64().unwrap() > 0.0);
    let args = ["estimate", "paths", "--m-max", "4", "--half-width", "16", "--replicates", "20", "--out", p(&out)];
    assert_eq!(code(&args), 0);
    let args = ["estimate", "hops", "--beta", "0.5", "--t", "1", "--half-width", "32", "--replicates", "20", "--out", p(&out)];
    assert_eq!(code(&args), 0);
}

#[test]
fn verify_reports_pass_and_fail_per_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let o = lrp(&["verify", "scaling", "--seed", "1", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
    let report: lrp_cli::verify::SuiteReport = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert!(report.passed && report.checks.len() == 2);
    assert_eq!(lrp_cli::CliError::Verification("x".into()).exit_code(), 1);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.lrp");
    let d = dir.path().join("d.csv");
    let run = || -> Vec<(Vec<u8>, RunManifest)> {
        let args = ["sample", "--model", "continuous", "--d", "2", "--beta", "1.5", "--window", "0:20", "--seed", "9", "--out", p(&s)];
        assert_eq!(code(&args), 0);
        assert_eq!(code(&["dist", "--input", p(&s), "--from", "3,3", "--to", "17,12", "--out", p(&d)]), 0);
        [&s, &d]
            .into_iter()
            .map(|f| {
                let mut m = manifest(f);
                m.wall_time_seconds = 0.0;
                (std::fs::read(f).unwrap(), m)
            })
            .collect()
    };
    assert_eq!(run(), run());
}
