//! Artifact emission with digest manifests.
//!
//! Every experiment writes its data files through an [`ArtifactSink`], then
//! `result.json` with metrics and verdicts, and finally `manifest.json`
//! listing every other output with its SHA-256 digest. The manifest is
//! written last and verified by reading it back and re-hashing the files on
//! disk, so a manifest that parses is a proof that the artifacts it names
//! are intact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use fractal_core::error::{CoreError, Result};

/// Metrics, verdicts, and artifact names of one experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub master_seed: u64,
    /// Fully resolved configuration (defaults + overrides), as given.
    pub parameters: BTreeMap<String, String>,
    /// Flat name -> number map; finite values only.
    pub metrics: BTreeMap<String, f64>,
    /// One verdict per registered acceptance predicate.
    pub predicates: BTreeMap<String, bool>,
    /// Conjunction of all predicate verdicts.
    pub pass: bool,
    /// Artifact file names relative to the output directory.
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
struct RunManifest {
    experiment: String,
    parameters: BTreeMap<String, String>,
    master_seed: u64,
    tool_version: String,
    started: String,
    finished: String,
    outputs: Vec<ManifestEntry>,
}

/// Registers output files as they are produced and emits the manifest.
pub struct ArtifactSink {
    dir: PathBuf,
    files: Vec<String>,
    started: String,
}

impl ArtifactSink {
    pub fn new(dir: &Path) -> Result<ArtifactSink> {
        std::fs::create_dir_all(dir)?;
        Ok(ArtifactSink {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: iso8601_utc_now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Reserve an output file name; the caller writes to the returned path.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn file_names(&self) -> &[String] {
        &self.files
    }

    /// Write `result.json` and then `manifest.json` (always last), digesting
    /// every registered file from disk and verifying the manifest by
    /// re-reading it.
    pub fn finish(mut self, result: &ExperimentResult) -> Result<()> {
        let result_path = self.file("result.json");
        fractal_core::io::write_json(&result_path, result)?;

        let mut outputs = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let bytes = std::fs::read(self.dir.join(name))?;
            outputs.push(ManifestEntry {
                path: name.clone(),
                sha256: hex_sha256(&bytes),
                bytes: bytes.len() as u64,
            });
        }
        let manifest = RunManifest {
            experiment: result.experiment.clone(),
            parameters: result.parameters.clone(),
            master_seed: result.master_seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: self.started.clone(),
            finished: iso8601_utc_now(),
            outputs,
        };
        let manifest_path = self.dir.join("manifest.json");
        fractal_core::io::write_json(&manifest_path, &manifest)?;
        verify_manifest(&self.dir)
    }
}

/// Read back `manifest.json` in `dir` and re-hash every listed file.
pub fn verify_manifest(dir: &Path) -> Result<()> {
    let manifest = fractal_core::io::read_json(&dir.join("manifest.json"))?;
    let outputs = manifest
        .get("outputs")
        .and_then(|v| v.as_array())
        .ok_or_else(|| CoreError::Format("manifest has no outputs array".into()))?;
    for entry in outputs {
        let path = entry
            .get("path")
            .and_then(|v| v.as_str())
            .ok_or_else(|| CoreError::Format("manifest entry without path".into()))?;
        let want = entry
            .get("sha256")
            .and_then(|v| v.as_str())
            .ok_or_else(|| CoreError::Format("manifest entry without sha256".into()))?;
        let bytes = std::fs::read(dir.join(path))?;
        let got = hex_sha256(&bytes);
        if got != want {
            return Err(CoreError::Format(format!(
                "digest mismatch for {path}: manifest {want}, disk {got}"
            )));
        }
    }
    Ok(())
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Current UTC time as `YYYY-MM-DDTHH:MM:SS.mmmZ` (proleptic Gregorian,
/// civil-from-days conversion).
fn iso8601_utc_now() -> String {
    let d = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default();
    let secs = d.as_secs();
    let millis = d.subsec_millis();
    let (h, m, s) = (secs / 3600 % 24, secs / 60 % 60, secs % 60);
    let (year, month, day) = civil_from_days((secs / 86400) as i64);
    format!("{year:04}-{month:02}-{day:02}T{h:02}:{m:02}:{s:02}.{millis:03}Z")
}

fn civil_from_days(days_since_epoch: i64) -> (i64, u32, u32) {
    let z = days_since_epoch + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = (z - era * 146_097) as u64;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe as i64 + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}
