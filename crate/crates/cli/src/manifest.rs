use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formats::{fnv1a64, with_suffix, write_atomic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub bytes: u64,
    /// FNV-1a of the file contents, hex.
    pub fnv1a64: String,
}

/// Everything needed to replay a run. Apart from `wall_time_seconds`, a
/// rerun with the same flags reproduces the manifest byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub toolkit_version: String,
    pub outputs: Vec<OutputDigest>,
    pub wall_time_seconds: f64,
}

/// Collects output files for one command and writes its manifest.
pub struct Recorder {
    command: String,
    parameters: serde_json::Value,
    seed: Option<u64>,
    outputs: Vec<OutputDigest>,
    started: Instant,
}

impl Recorder {
    pub fn new(command: &str, parameters: serde_json::Value, seed: Option<u64>) -> Self {
        Recorder {
            command: command.to_owned(),
            parameters,
            seed,
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Writes `bytes` atomically to `path` and records its digest.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.outputs.push(OutputDigest {
            path: path.display().to_string(),
            bytes: bytes.len() as u64,
            fnv1a64: format!("{:016x}", fnv1a64(bytes)),
        });
        Ok(())
    }

    pub fn finish(self, manifest_path: &Path) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command,
            parameters: self.parameters,
            seed: self.seed,
            toolkit_version: env!("CARGO_PKG_VERSION").to_owned(),
            outputs: self.outputs,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        text.push(b'\n');
        write_atomic(manifest_path, &text)?;
        Ok(manifest)
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    with_suffix(out, ".manifest.json")
}
