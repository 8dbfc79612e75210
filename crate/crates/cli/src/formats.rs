//! Persistent file formats.
//!
//! Samples are little-endian binary files:
//!
//! ```text
//! magic[8] version:u32 d:u32 beta:f64 delta:f64 delta_max:f64 seed:u64
//! continuous: window lo[d]:f64 hi[d]:f64, labels:u32 {len:u32 utf8}*,
//!             count:u64, records count * 2d f64 (endpoint a then b)
//! lattice:    box lo[d]:i64 hi[d]:i64, count:u64, records count * (u64, u64)
//! checksum:u64 (FNV-1a over the record bytes)
//! ```
//!
//! Rasters are raw little-endian `f32` grids with a JSON sidecar; CSV floats
//! are written with 17 significant digits so they round-trip exactly.

use std::hash::Hasher;
use std::io::Write;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use lrp_core::{EdgeConfiguration, LatticeBox, LatticeGraph, LongEdge, ModelParams, Point, Window};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;
const EDGE_MAGIC: &[u8; 8] = b"LRPEDGE\0";
const LATTICE_MAGIC: &[u8; 8] = b"LRPLATT\0";
const MAX_DIM: u32 = 16;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    // Temporary files default to owner-only access; outputs are ordinary files.
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o644));
    let mut tmp = builder.tempfile_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

/// `<path><suffix>`, e.g. `out.csv` + `.manifest.json`.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// A sample of either model, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Continuous(EdgeConfiguration),
    Lattice(LatticeGraph),
}

impl Sample {
    pub fn dim(&self) -> usize {
        match self {
            Sample::Continuous(c) => c.dim(),
            Sample::Lattice(g) => g.lattice_box.dim(),
        }
    }

    pub fn params(&self) -> &ModelParams {
        match self {
            Sample::Continuous(c) => &c.params,
            Sample::Lattice(g) => &g.params,
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn header(&mut self, magic: &[u8; 8], p: &ModelParams) {
        self.0.extend_from_slice(magic);
        self.u32(FORMAT_VERSION);
        self.u32(p.d as u32);
        self.f64(p.beta);
        self.f64(p.delta_min);
        self.f64(p.delta_max);
        self.u64(p.seed);
    }
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(CliError::format(self.path, "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
    fn bad(&self, reason: impl Into<String>) -> CliError {
        CliError::format(self.path, reason)
    }

    fn header(&mut self) -> Result<ModelParams> {
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(self.bad(format!("unsupported format version {version}")));
        }
        let d = self.u32()?;
        if d == 0 || d > MAX_DIM {
            return Err(self.bad(format!("dimension {d} out of range")));
        }
        let params = ModelParams {
            d: d as usize,
            beta: self.f64()?,
            delta_min: self.f64()?,
            delta_max: self.f64()?,
            seed: self.u64()?,
        };
        params.validate().map_err(|e| self.bad(e.to_string()))?;
        Ok(params)
    }

    /// Reads the record count, checks it against the bytes left (records
    /// plus the trailing checksum) and returns the verified record bytes.
    fn records(&mut self, record_size: usize) -> Result<(usize, &'a [u8])> {
        let count = self.u64()?;
        let need = (count as u128) * record_size as u128 + 8;
        if need != self.remaining() as u128 {
            return Err(self.bad(format!(
                "count {count} does not match the {} bytes that follow",
                self.remaining()
            )));
        }
        let body = self.take(count as usize * record_size)?;
        let checksum = self.u64()?;
        if checksum != fnv1a64(body) {
            return Err(self.bad("checksum mismatch"));
        }
        Ok((count as usize, body))
    }
}

fn f64_at(body: &[u8], i: usize) -> f64 {
    f64::from_le_bytes(body[8 * i..8 * i + 8].try_into().unwrap())
}

fn u64_at(body: &[u8], i: usize) -> u64 {
    u64::from_le_bytes(body[8 * i..8 * i + 8].try_into().unwrap())
}

pub fn encode_edges(config: &EdgeConfiguration) -> Vec<u8> {
    let d = config.dim();
    let mut w = Writer(Vec::with_capacity(128 + config.edges.len() * 16 * d));
    w.header(EDGE_MAGIC, &config.params);
    for &v in config.window.lo.coords().iter().chain(config.window.hi.coords()) {
        w.f64(v);
    }
    w.u32(config.seed_trace.len() as u32);
    for label in &config.seed_trace {
        w.u32(label.len() as u32);
        w.0.extend_from_slice(label.as_bytes());
    }
    w.u64(config.edges.len() as u64);
    let start = w.0.len();
    for e in &config.edges {
        for &v in e.a.coords().iter().chain(e.b.coords()) {
            w.f64(v);
        }
    }
    let sum = fnv1a64(&w.0[start..]);
    w.u64(sum);
    w.0
}

pub fn encode_lattice(graph: &LatticeGraph) -> Vec<u8> {
    let b = &graph.lattice_box;
    let mut w = Writer(Vec::with_capacity(128 + graph.long_edges.len() * 16));
    w.header(LATTICE_MAGIC, &graph.params);
    for &v in b.lo.iter().chain(&b.hi) {
        w.i64(v);
    }
    w.u64(graph.long_edges.len() as u64);
    let start = w.0.len();
    for &(i, j) in &graph.long_edges {
        w.u64(i as u64);
        w.u64(j as u64);
    }
    let sum = fnv1a64(&w.0[start..]);
    w.u64(sum);
    w.0
}

pub fn encode_sample(sample: &Sample) -> Vec<u8> {
    match sample {
        Sample::Continuous(c) => encode_edges(c),
        Sample::Lattice(g) => encode_lattice(g),
    }
}

pub fn decode_sample(path: &Path, bytes: &[u8]) -> Result<Sample> {
    let mut r = Reader { path, bytes, pos: 0 };
    let magic = r.take(8)?;
    if magic == EDGE_MAGIC {
        decode_edges(&mut r).map(Sample::Continuous)
    } else if magic == LATTICE_MAGIC {
        decode_lattice(&mut r).map(Sample::Lattice)
    } else {
        Err(r.bad("not a sample file (bad magic)"))
    }
}

fn decode_edges(r: &mut Reader) -> Result<EdgeConfiguration> {
    let params = r.header()?;
    let d = params.d;
    let corner = |r: &mut Reader| -> Result<Point> {
        let c = (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        Point::new(c).map_err(|e| r.bad(e.to_string()))
    };
    let lo = corner(r)?;
    let hi = corner(r)?;
    let window = Window::new(lo, hi).map_err(|e| r.bad(e.to_string()))?;
    let labels = r.u32()?;
    let mut seed_trace = Vec::new();
    for _ in 0..labels {
        let len = r.u32()? as usize;
        let s = std::str::from_utf8(r.take(len)?).map_err(|_| r.bad("label is not utf-8"))?;
        seed_trace.push(s.to_owned());
    }
    let (count, body) = r.records(16 * d)?;
    let mut edges = Vec::with_capacity(count);
    for k in 0..count {
        let at = |j: usize| f64_at(body, 2 * d * k + j);
        let a = Point::new((0..d).map(at).collect()).map_err(|e| r.bad(e.to_string()))?;
        let b = Point::new((d..2 * d).map(at).collect()).map_err(|e| r.bad(e.to_string()))?;
        edges.push(LongEdge { a, b });
    }
    let config = EdgeConfiguration {
        params,
        window,
        edges,
        seed_trace,
    };
    config.validate().map_err(|e| r.bad(e.to_string()))?;
    Ok(config)
}

fn decode_lattice(r: &mut Reader) -> Result<LatticeGraph> {
    let params = r.header()?;
    let d = params.d;
    let lo = (0..d).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
    let hi = (0..d).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
    let lattice_box = LatticeBox::new(lo, hi).map_err(|e| r.bad(e.to_string()))?;
    let (count, body) = r.records(16)?;
    let n = lattice_box.len() as u64;
    let mut pairs = Vec::with_capacity(count);
    for k in 0..count {
        let (i, j) = (u64_at(body, 2 * k), u64_at(body, 2 * k + 1));
        if i >= j || j >= n {
            return Err(r.bad(format!("edge ({i}, {j}) is not an ordered pair of box indices")));
        }
        pairs.push((i as usize, j as usize));
    }
    if pairs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(r.bad("edges are not in canonical order"));
    }
    let graph = LatticeGraph {
        lattice_box,
        long_edges: pairs,
        params,
    };
    for (a, b) in graph.edge_points() {
        let l1: i64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        if l1 <= 1 {
            return Err(r.bad("nearest-neighbour pair stored as a long edge"));
        }
    }
    Ok(graph)
}

pub fn write_sample(path: &Path, sample: &Sample) -> Result<()> {
    write_atomic(path, &encode_sample(sample))
}

pub fn read_sample(path: &Path) -> Result<Sample> {
    decode_sample(path, &read_file(path)?)
}

/// Sidecar describing a raster file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterMeta {
    pub format: String,
    pub shape: Vec<usize>,
    pub order: String,
    /// `lattice` (one value per vertex) or `grid` (one value per cell centre).
    pub domain: String,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub resolution: f64,
    pub source: Vec<f64>,
    pub params: ModelParams,
    pub value: String,
}

pub fn encode_raster(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect()
}

pub fn decode_raster(path: &Path, bytes: &[u8]) -> Result<Vec<f32>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(CliError::format(path, "raster length is not a multiple of 4"));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Float with 17 significant digits: parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn axis_columns(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|a| format!("{prefix}{a}")).collect()
}
