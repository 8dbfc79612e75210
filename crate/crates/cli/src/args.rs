use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "lrp", version, about = "Critical long-range percolation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a discrete or continuous sample.
    Sample(SampleArgs),
    /// Distances between query points of a sample.
    Dist(DistArgs),
    /// A geodesic between two points of a sample.
    Geodesic(GeodesicArgs),
    /// Distance raster from a source point.
    Ball(BallArgs),
    /// Diameters of nested intervals on one growing sample.
    Diam(DiamArgs),
    /// Run an estimator and write its report.
    Estimate(EstimateArgs),
    /// Run a verification suite; exit 1 if any check fails.
    Verify(VerifyArgs),
    /// Emit the data behind the ball, geodesic and diameter figures.
    Figures(FiguresArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Discrete,
    Continuous,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long)]
    pub beta: f64,
    /// Lower scope cutoff (continuous model).
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Upper scope cutoff (continuous model); `inf` for none.
    #[arg(long, default_value_t = f64::INFINITY)]
    #[serde(serialize_with = "ser_float")]
    pub delta_max: f64,
    /// Continuous window `lo:hi` (a cube) or `lo:hi,lo:hi,...` per axis.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Lattice box `lo:hi` (a cube) or per axis, integer bounds inclusive.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub lattice_box: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DistArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Query start, comma-separated coordinates; repeat for several pairs.
    #[arg(long = "from", required = true, allow_hyphen_values = true)]
    pub from: Vec<String>,
    #[arg(long = "to", required = true, allow_hyphen_values = true)]
    pub to: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GeodesicArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long = "from", allow_hyphen_values = true)]
    pub from: String,
    #[arg(long = "to", allow_hyphen_values = true)]
    pub to: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BallArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub source: String,
    /// Cell side of the raster (continuous samples only).
    #[arg(long, default_value_t = 1.0)]
    pub resolution: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DiamArgs {
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Increasing betas, coupled by superposition; repeat the flag.
    #[arg(long = "beta", required = true)]
    pub betas: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub half_width: i64,
    /// Interval half-lengths; defaults to powers of two up to 4096.
    #[arg(long = "n", value_delimiter = ',')]
    pub n_values: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    Medians,
    Theta,
    Tails,
    Paths,
    Hops,
    Scaling,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(value_enum)]
    pub kind: EstimateKind,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Repeat for several (increasing) betas where supported.
    #[arg(long = "beta", default_values_t = [1.0])]
    pub betas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ModelArg::Discrete)]
    pub model: ModelArg,
    #[arg(long = "n", value_delimiter = ',', default_values_t = [16u64, 32, 64, 128, 256])]
    pub n_values: Vec<u64>,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    /// Tail exponent for `tails`.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Normalizing exponent for `tails`; fitted from the diameters if absent.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Longest path for `paths`.
    #[arg(long, default_value_t = 6)]
    pub m_max: usize,
    /// Length budget for `hops`.
    #[arg(long, default_value_t = 2.0)]
    pub t: f64,
    /// Sample half-width for `paths` and `hops`.
    #[arg(long, default_value_t = 256.0)]
    pub half_width: f64,
    /// Scale factor for `scaling`.
    #[arg(long, default_value_t = 8.0)]
    pub scale: f64,
    /// Normalizing exponent for `scaling`.
    #[arg(long, default_value_t = 1.0)]
    pub exponent: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Theta,
    Medians,
    Tails,
    Paths,
    Hops,
    Scaling,
    Coupling,
    Axioms,
    Oracle,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    /// Metric-ball rasters on a square lattice.
    Balls,
    /// Two-dimensional geodesics from the centre.
    Geodesics2d,
    /// One-dimensional geodesics as time/position traces.
    Geodesics1d,
    /// Diameter growth of nested intervals.
    Diameters,
}

#[derive(Debug, Args, Serialize)]
pub struct FiguresArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Subset of figures; all by default.
    #[arg(long = "only", value_enum)]
    pub only: Vec<Figure>,
    /// Increasing betas, coupled by superposition.
    #[arg(long = "beta", value_delimiter = ',', default_values_t = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0])]
    pub betas: Vec<f64>,
    /// Side of the square lattice for balls and 2d geodesics.
    #[arg(long, default_value_t = 1000)]
    pub side: i64,
    /// Half-width of the one-dimensional samples.
    #[arg(long, default_value_t = 100_000)]
    pub half_width: i64,
    /// Largest interval half-length for the diameter curves.
    #[arg(long, default_value_t = 4096)]
    pub n_max: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// JSON has no infinities; non-finite values are written as strings.
fn ser_float<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&v.to_string())
    }
}

pub fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("bad coordinate '{t}' in '{s}'")))
        })
        .collect()
}

pub fn parse_lattice_point(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| CliError::Usage(format!("bad lattice coordinate '{t}' in '{s}'")))
        })
        .collect()
}

/// Parses `lo:hi` (cube, expanded to `d` axes) or `lo:hi,...` (one per axis).
pub fn parse_ranges<T: std::str::FromStr + Copy>(s: &str, d: usize) -> Result<Vec<(T, T)>> {
    let ranges = s
        .split(',')
        .map(|r| {
            let (lo, hi) = r
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("range '{r}' is not lo:hi")))?;
            let parse = |t: &str| {
                t.trim()
                    .parse::<T>()
                    .map_err(|_| CliError::Usage(format!("bad bound '{t}' in '{r}'")))
            };
            Ok((parse(lo)?, parse(hi)?))
        })
        .collect::<Result<Vec<_>>>()?;
    match ranges.len() {
        1 => Ok(vec![ranges[0]; d]),
        n if n == d => Ok(ranges),
        n => Err(CliError::Usage(format!("{n} ranges given for dimension {d}"))),
    }
}
