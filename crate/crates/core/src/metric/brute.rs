use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{EdgeConfiguration, ModelParams, Point, Window};
use crate::rng::derive_stream;
use crate::sampler::sample_continuous;

pub const BRUTE_FORCE_MAX_ENDPOINTS: usize = 64;

/// Number of edges in an oracle instance.
pub const ORACLE_EDGES: usize = 20;

/// A small seeded instance for oracle comparisons: a uniformly chosen
/// subset of [`ORACLE_EDGES`] edges of a PPP sample on `[0, 10]^d`, together
/// with two uniform query points.
pub fn oracle_instance(d: usize, seed: u64) -> Result<(EdgeConfiguration, Point, Point)> {
    let window = Window::cube(d, 0.0, 10.0)?;
    let params = ModelParams::new(d, 1.0, 0.5, f64::INFINITY, seed)?;
    let mut config = sample_continuous(&params, &window, &derive_stream(seed, "oracle/sample"))?;
    let mut rng = derive_stream(seed, "oracle/queries");
    if config.edges.len() > ORACLE_EDGES {
        let keep = rand::seq::index::sample(&mut rng, config.edges.len(), ORACLE_EDGES);
        config.edges = keep.into_iter().map(|i| config.edges[i].clone()).collect();
        config.sort_edges();
    }
    let mut draw = || {
        Point::new((0..d).map(|_| 10.0 * rng.random::<f64>()).collect())
    };
    let x = draw()?;
    let y = draw()?;
    Ok((config, x, y))
}

/// Reference distance: Floyd–Warshall over `{x, y}` and all edge endpoints,
/// with hop arcs of weight 0 and gap arcs of Euclidean weight.
pub fn brute_force_distance(config: &EdgeConfiguration, x: &Point, y: &Point) -> Result<f64> {
    let ends = 2 * config.edges.len();
    if ends > BRUTE_FORCE_MAX_ENDPOINTS {
        return Err(Error::Resource(format!(
            "{ends} endpoints exceed the brute-force limit of {BRUTE_FORCE_MAX_ENDPOINTS}"
        )));
    }
    let mut pts: Vec<&Point> = vec![x, y];
    for e in &config.edges {
        pts.push(&e.a);
        pts.push(&e.b);
    }
    let n = pts.len();
    let mut w = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            w[i][j] = pts[i].dist(pts[j]);
        }
    }
    for k in 0..config.edges.len() {
        let (a, b) = (2 + 2 * k, 3 + 2 * k);
        w[a][b] = 0.0;
        w[b][a] = 0.0;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = w[i][k] + w[k][j];
                if via < w[i][j] {
                    w[i][j] = via;
                }
            }
        }
    }
    Ok(w[0][1])
}
