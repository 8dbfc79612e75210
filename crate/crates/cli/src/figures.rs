//! Data behind the ball, geodesic and diameter figures. Every beta of a
//! figure uses one sample grown by superposition, so the panels are coupled.

use lrp_core::estimators::coupled_diameters;
use lrp_core::metric::{bfs_distance, bfs_geodesic};
use lrp_core::sampler::{sample_discrete_with, superpose_discrete_with, MassCache};
use lrp_core::{derive_stream, LatticeBox, LatticeGraph, ModelParams};

use crate::args::{Figure, FiguresArgs};
use crate::commands::{default_n_schedule, diameter_csv, ensure_dir, params_json, raster_files, trace_csv};
use crate::error::{CliError, Result};
use crate::manifest::Recorder;

/// Lattice samples on `lattice_box` for each of the increasing `betas`,
/// coupled by superposition; `visit` sees them in order.
fn coupled_chain(
    d: usize,
    lattice_box: &LatticeBox,
    betas: &[f64],
    seed: u64,
    label: &str,
    mut visit: impl FnMut(usize, &LatticeGraph) -> Result<()>,
) -> Result<()> {
    let cache = MassCache::new(d);
    let stream = derive_stream(seed, label);
    let mut graph = sample_discrete_with(
        &ModelParams::discrete(d, betas[0], seed)?,
        lattice_box,
        &stream.split("beta/0"),
        &cache,
    )?;
    for (b, &beta) in betas.iter().enumerate() {
        if b > 0 {
            graph = superpose_discrete_with(
                &graph,
                beta - betas[b - 1],
                &stream.split(&format!("beta/{b}")),
                &cache,
            )?;
        }
        visit(b, &graph)?;
    }
    Ok(())
}

pub fn run(a: &FiguresArgs) -> Result<()> {
    if a.betas.is_empty() || a.betas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage("--beta values must be strictly increasing".into()));
    }
    if a.side < 2 || a.half_width < 1 {
        return Err(CliError::Usage("--side must be at least 2 and --half-width at least 1".into()));
    }
    let want = |f: Figure| a.only.is_empty() || a.only.contains(&f);
    ensure_dir(&a.out_dir)?;
    let mut rec = Recorder::new("figures", params_json(a), Some(a.seed));

    if want(Figure::Balls) || want(Figure::Geodesics2d) {
        let lo = -(a.side / 2);
        let square = LatticeBox::cube(2, lo, lo + a.side - 1)?;
        let corner = vec![square.hi[0]; 2];
        coupled_chain(2, &square, &a.betas, a.seed, "figures/plane", |b, g| {
            let beta = a.betas[b];
            if want(Figure::Balls) {
                let (raster, sidecar) = raster_files(&bfs_distance(g, &[0, 0])?, &g.params);
                let path = a.out_dir.join(format!("ball_beta{beta}.f32"));
                rec.write(&path, &raster)?;
                rec.write(&a.out_dir.join(format!("ball_beta{beta}.f32.json")), &sidecar)?;
            }
            if want(Figure::Geodesics2d) {
                let r = bfs_geodesic(g, &[0, 0], &corner)?;
                rec.write(&a.out_dir.join(format!("geodesic2d_beta{beta}.csv")), &trace_csv(&r.trace))?;
            }
            Ok(())
        })?;
    }

    if want(Figure::Geodesics1d) {
        let line = LatticeBox::cube(1, -a.half_width, a.half_width)?;
        coupled_chain(1, &line, &a.betas, a.seed, "figures/line", |b, g| {
            let r = bfs_geodesic(g, &[0], &[a.half_width])?;
            let path = a.out_dir.join(format!("geodesic1d_beta{}.csv", a.betas[b]));
            rec.write(&path, &trace_csv(&r.trace))
        })?;
    }

    let mut ordered = true;
    if want(Figure::Diameters) {
        let ns = default_n_schedule(a.n_max.min(a.half_width as u64));
        let curves = coupled_diameters(1, &a.betas, a.half_width, &ns, a.seed)?;
        ordered = curves.iter().all(|c| c.windows(2).all(|w| w[0] <= w[1]))
            && curves.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(lo, hi)| hi <= lo));
        rec.write(&a.out_dir.join("diameters.csv"), &diameter_csv(&a.betas, &ns, &curves))?;
    }

    rec.finish(&a.out_dir.join("figures.manifest.json"))?;
    if !ordered {
        return Err(CliError::Verification(
            "diameter curves are not monotone in n and ordered in beta".into(),
        ));
    }
    Ok(())
}
