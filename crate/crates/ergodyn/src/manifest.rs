//! Run manifests: what was computed, from which config, into which files.
//!
//! The manifest is the only artifact carrying wall-clock times, so every
//! other artifact of a seeded run is byte-reproducible and the manifest
//! lists each one with its checksum.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{DynError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub wall_clock_s: f64,
    pub resolved: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).map_err(|e| DynError::io(path.display().to_string(), e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

impl RunManifest {
    pub fn new(config_hash: String, seed: u64) -> Self {
        RunManifest {
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            seed,
            stages: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Times `f`, records the stage, and passes its result through.
    pub fn stage<T>(
        &mut self,
        name: &str,
        resolved: impl Fn(&T) -> bool,
        f: impl FnOnce() -> Result<T>,
    ) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.stages.push(StageRecord {
            name: name.to_string(),
            wall_clock_s: start.elapsed().as_secs_f64(),
            resolved: resolved(&out),
        });
        Ok(out)
    }

    /// Checksums an emitted file into the inventory; `path` is stored
    /// relative to the output directory.
    pub fn record_file(&mut self, dir: &Path, name: &str) -> Result<()> {
        let full = dir.join(name);
        let bytes = std::fs::metadata(&full)
            .map_err(|e| DynError::io(full.display().to_string(), e))?
            .len();
        self.files.push(FileRecord {
            path: name.to_string(),
            bytes,
            sha256: file_sha256(&full)?,
        });
        Ok(())
    }

    pub fn all_resolved(&self) -> bool {
        self.stages.iter().all(|s| s.resolved)
    }

    /// Writes `manifest.json` into the directory (not listed in itself).
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n")
            .map_err(|e| DynError::io(path.display().to_string(), e))
    }
}
