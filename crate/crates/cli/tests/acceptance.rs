//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime
//! budget. Exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lrp_cli::manifest::RunManifest;
use lrp_cli::verify::{self, Check};

const SEED: u64 = 0;

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    elapsed: Duration,
    budget: Option<Duration>,
    detail: String,
}

fn minutes(m: u64) -> Option<Duration> {
    Some(Duration::from_secs(60 * m))
}

fn criterion(
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    f: impl FnOnce() -> Result<(bool, String), String>,
) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    let elapsed = start.elapsed();
    let in_budget = budget.is_none_or(|b| elapsed <= b);
    let outcome = Outcome {
        id,
        name,
        passed: ok && in_budget,
        elapsed,
        budget,
        detail: if in_budget { detail } else { format!("over budget; {detail}") },
    };
    report(&outcome);
    outcome
}

fn report(o: &Outcome) {
    let budget = o.budget.map_or("none".to_owned(), |b| format!("{} s", b.as_secs()));
    println!(
        "criterion {:>2} {} {} ({:.1} s, budget {budget}) {}",
        o.id,
        if o.passed { "PASS" } else { "FAIL" },
        o.name,
        o.elapsed.as_secs_f64(),
        o.detail
    );
}

fn checks(r: lrp_cli::Result<Vec<Check>>) -> Result<(bool, String), String> {
    let c = r.map_err(|e| e.to_string())?;
    let detail = c
        .iter()
        .map(|c| format!("[{}{}: {}]", if c.passed { "" } else { "FAILED " }, c.name, c.detail))
        .collect::<Vec<_>>()
        .join(" ");
    Ok((c.iter().all(|c| c.passed), detail))
}

fn lrp(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_lrp"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!(
            "lrp {} exited with {:?}: {}",
            args.join(" "),
            o.status.code(),
            String::from_utf8_lossy(&o.stderr).trim()
        ))
    }
}

/// Every file under `dir`, manifests with the wall time zeroed.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            continue;
        }
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = std::fs::read(&path).unwrap();
        if name.ends_with(".manifest.json") {
            let mut m: RunManifest = serde_json::from_slice(&bytes).unwrap();
            m.wall_time_seconds = 0.0;
            bytes = serde_json::to_vec(&m).unwrap();
        }
        files.insert(name, bytes);
    }
    files
}

fn compare(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let mut diffs: Vec<String> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(v))
        .map(|(k, _)| k.clone())
        .collect();
    diffs.extend(b.keys().filter(|k| !a.contains_key(*k)).cloned());
    diffs
}

fn figures_run(dir: &Path, extra: &[&str]) -> Result<Duration, String> {
    let start = Instant::now();
    let mut args = vec!["figures", "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    lrp(&args)?;
    Ok(start.elapsed())
}

fn figure_outputs(dir: &Path) -> Result<(bool, String), String> {
    let betas = ["0.01", "0.1", "0.5", "1", "2", "5"];
    let mut missing = Vec::new();
    let mut bad_rasters = 0;
    for b in betas {
        for name in [
            format!("ball_beta{b}.f32"),
            format!("ball_beta{b}.f32.json"),
            format!("geodesic2d_beta{b}.csv"),
            format!("geodesic1d_beta{b}.csv"),
        ] {
            if !dir.join(&name).exists() {
                missing.push(name);
            }
        }
        if let Ok(m) = std::fs::metadata(dir.join(format!("ball_beta{b}.f32"))) {
            bad_rasters += (m.len() != 4 * 1000 * 1000) as usize;
        }
    }
    // The 1d geodesic runs from 0 to the right end of [-10^5, 10^5].
    let last = std::fs::read_to_string(dir.join("geodesic1d_beta1.csv")).map_err(|e| e.to_string())?;
    let end: f64 = last.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    let text = std::fs::read_to_string(dir.join("diameters.csv")).map_err(|e| e.to_string())?;
    let mut curves: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
    let mut order = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let beta = f[0].parse::<f64>().unwrap().to_bits();
        if !curves.contains_key(&beta) {
            order.push(beta);
        }
        curves.entry(beta).or_default().push(f[2].parse().unwrap());
    }
    let seq: Vec<&Vec<u32>> = order.iter().map(|b| &curves[b]).collect();
    let monotone = seq.iter().all(|c| c.windows(2).all(|w| w[0] <= w[1]));
    let ordered = seq.windows(2).all(|w| w[0].iter().zip(w[1]).all(|(lo, hi)| hi <= lo));
    let n_points = seq.first().map_or(0, |c| c.len());
    let ok = missing.is_empty() && bad_rasters == 0 && end == 1e5 && seq.len() == 6 && monotone && ordered;
    Ok((
        ok,
        format!(
            "missing {missing:?}, {bad_rasters} malformed rasters, 1d geodesic ends at {end}, \
             {} diameter curves x {n_points} n values, monotone in n: {monotone}, ordered in beta: {ordered}; \
             diam(4096) by beta: {:?}",
            seq.len(),
            seq.iter().map(|c| c.last().copied().unwrap_or(0)).collect::<Vec<_>>()
        ),
    ))
}

/// Runs every command twice into separate directories at the same relative
/// paths and compares all outputs.
fn rerun_everything() -> Result<(bool, String), String> {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = root.path().join("run");
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let f = |name: &str| dir.join(name).to_str().unwrap().to_owned();
        let (cont, lat) = (f("cont.lrp"), f("lat.lrp"));
        let commands: Vec<Vec<String>> = vec![
            "sample --model continuous --d 2 --beta 1.5 --window 0:40 --seed 5 --out".split(' ').map(String::from).chain([cont.clone()]).collect(),
            "sample --model discrete --d 2 --beta 1 --box -30:30 --seed 5 --out".split(' ').map(String::from).chain([lat.clone()]).collect(),
            vec!["dist".into(), "--input".into(), cont.clone(), "--from".into(), "5,5".into(), "--to".into(), "35,30".into(), "--from".into(), "20,20".into(), "--to".into(), "1,39".into(), "--out".into(), f("dist_c.csv")],
            vec!["dist".into(), "--input".into(), lat.clone(), "--from".into(), "-30,-30".into(), "--to".into(), "30,30".into(), "--out".into(), f("dist_l.csv")],
            vec!["geodesic".into(), "--input".into(), cont.clone(), "--from".into(), "5,5".into(), "--to".into(), "35,30".into(), "--out".into(), f("geo_c.csv")],
            vec!["geodesic".into(), "--input".into(), lat.clone(), "--from".into(), "0,0".into(), "--to".into(), "30,-30".into(), "--out".into(), f("geo_l.csv")],
            vec!["ball".into(), "--input".into(), cont.clone(), "--source".into(), "20,20".into(), "--resolution".into(), "0.5".into(), "--out".into(), f("ball_c.f32")],
            vec!["ball".into(), "--input".into(), lat.clone(), "--source".into(), "0,0".into(), "--out".into(), f("ball_l.f32")],
            "diam --beta 0.5 --beta 2 --half-width 3000 --seed 2 --out".split(' ').map(String::from).chain([f("diam.csv")]).collect(),
            "estimate medians --n 4,8,16,32 --replicates 30 --resamples 100 --out".split(' ').map(String::from).chain([f("est_medians.json")]).collect(),
            "estimate medians --model continuous --n 2,4,8,16 --replicates 20 --resamples 100 --out".split(' ').map(String::from).chain([f("est_medians_c.json")]).collect(),
            "estimate theta --beta 0.5 --beta 2 --n 8,16,32,64 --replicates 30 --resamples 100 --out".split(' ').map(String::from).chain([f("est_theta.json")]).collect(),
            "estimate tails --n 8,16,32,64 --replicates 30 --resamples 100 --out".split(' ').map(String::from).chain([f("est_tails.json")]).collect(),
            "estimate paths --m-max 5 --half-width 16 --replicates 50 --out".split(' ').map(String::from).chain([f("est_paths.json")]).collect(),
            "estimate hops --beta 0.5 --t 2 --half-width 64 --replicates 50 --out".split(' ').map(String::from).chain([f("est_hops.json")]).collect(),
            "estimate scaling --replicates 100 --out".split(' ').map(String::from).chain([f("est_scaling.json")]).collect(),
            "verify scaling --seed 3 --out".split(' ').map(String::from).chain([f("ver_scaling.json")]).collect(),
            "verify medians --seed 3 --out".split(' ').map(String::from).chain([f("ver_medians.json")]).collect(),
            "verify hops --seed 3 --out".split(' ').map(String::from).chain([f("ver_hops.json")]).collect(),
            "verify paths --seed 3 --out".split(' ').map(String::from).chain([f("ver_paths.json")]).collect(),
        ];
        for c in &commands {
            lrp(&c.iter().map(String::as_str).collect::<Vec<_>>())?;
        }
        let figs = dir.join("figures");
        figures_run(&figs, &["--side", "200", "--half-width", "5000", "--n-max", "1024"])?;
        let mut snap = snapshot(&dir);
        for (k, v) in snapshot(&figs) {
            snap.insert(format!("figures/{k}"), v);
        }
        runs.push((commands.len() + 1, snap));
        if runs.len() == 1 {
            std::fs::rename(&dir, root.path().join("first")).map_err(|e| e.to_string())?;
        }
    }
    let diffs = compare(&runs[0].1, &runs[1].1);
    Ok((
        diffs.is_empty() && runs[0].1.len() > 40,
        format!(
            "{} commands, {} output files compared; differing: {diffs:?}",
            runs[0].0,
            runs[0].1.len()
        ),
    ))
}

fn main() {
    let mut outcomes = Vec::new();
    outcomes.push(criterion(1, "oracle equivalence", minutes(1), || {
        checks(verify::oracle_checks(SEED))
    }));
    outcomes.push(criterion(2, "metric axioms", None, || checks(verify::axiom_checks(SEED))));
    outcomes.push(criterion(3, "sampler fidelity", minutes(2), || {
        checks(verify::sampler_checks(SEED))
    }));
    outcomes.push(criterion(4, "coupling inequalities", minutes(5), || {
        checks(verify::coupling_checks(SEED))
    }));
    outcomes.push(criterion(5, "coarse-grain fidelity", minutes(5), || {
        checks(verify::coarse_grain_checks(SEED))
    }));
    outcomes.push(criterion(6, "path and hop counts", minutes(10), || {
        checks(verify::path_checks(SEED).and_then(|mut c| {
            c.extend(verify::hop_checks(SEED)?);
            Ok(c)
        }))
    }));
    outcomes.push(criterion(7, "scaling invariance in law", minutes(10), || {
        checks(verify::scaling_checks(SEED))
    }));
    outcomes.push(criterion(8, "exponent behaviour", minutes(30), || {
        checks(verify::theta_checks(SEED))
    }));
    outcomes.push(criterion(9, "tail stability", minutes(15), || {
        checks(verify::tail_checks(SEED))
    }));
    outcomes.push(criterion(10, "figure reproduction", minutes(20), || {
        let root = tempfile::tempdir().map_err(|e| e.to_string())?;
        // Both runs write to the same path, as manifests record output paths.
        let dir = root.path().join("figures");
        let first = figures_run(&dir, &[])?;
        let (ok, detail) = figure_outputs(&dir)?;
        let before = snapshot(&dir);
        std::fs::remove_dir_all(&dir).map_err(|e| e.to_string())?;
        figures_run(&dir, &[])?;
        let diffs = compare(&before, &snapshot(&dir));
        Ok((
            ok && diffs.is_empty() && first <= Duration::from_secs(20 * 60),
            format!(
                "one emission {:.1} s; {detail}; rerun differs in {diffs:?}",
                first.as_secs_f64()
            ),
        ))
    }));
    outcomes.push(criterion(11, "byte-identical reruns", None, rerun_everything));

    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
