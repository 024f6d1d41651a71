//! The dataset manifest: one JSON document listing every image pair, its
//! boxes, and (for synthetic sets) the recipe that produced it.
//!
//! Image paths are relative to the directory holding the manifest.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use changeforge_core::synth::{GenerationConfig, MAX_CHANGES};
use changeforge_core::ChangeBox;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePairRecord {
    pub reference_path: String,
    pub test_path: String,
    pub boxes: Vec<ChangeBox>,
    pub pair_id: String,
    pub strategy_tag: String,
}

/// Seed plus a SHA-256 over the rest of the generation parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub seed: u64,
    pub parameter_hash: String,
}

impl Fingerprint {
    pub fn of(cfg: &GenerationConfig) -> Self {
        let mut params = cfg.clone();
        params.seed = 0;
        let bytes = serde_json::to_vec(&params).expect("config serializes");
        Self {
            seed: cfg.seed,
            parameter_hash: hex::encode(Sha256::digest(&bytes)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    /// Present for generated datasets; absent for ingested real pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<GenerationConfig>,
    pub records: Vec<ImagePairRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<Fingerprint>,
}

impl Manifest {
    pub fn synthetic(config: GenerationConfig, records: Vec<ImagePairRecord>) -> Self {
        let fingerprint = Some(Fingerprint::of(&config));
        Self {
            version: MANIFEST_VERSION,
            config: Some(config),
            records,
            fingerprint,
        }
    }

    pub fn real(records: Vec<ImagePairRecord>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            config: None,
            records,
            fingerprint: None,
        }
    }

    pub fn is_synthetic(&self) -> bool {
        self.config.is_some()
    }

    pub fn record(&self, pair_id: &str) -> Option<&ImagePairRecord> {
        self.records.iter().find(|r| r.pair_id == pair_id)
    }

    /// Checks everything that does not need the image files.
    pub fn check_schema(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::record("-", format!("unsupported manifest version {}", self.version)));
        }
        if let Some(cfg) = &self.config {
            cfg.validate()?;
            if self.records.len() != cfg.count {
                return Err(Error::record(
                    "-",
                    format!("{} records but config.count is {}", self.records.len(), cfg.count),
                ));
            }
        }
        let mut seen = HashSet::new();
        for r in &self.records {
            if r.pair_id.is_empty() {
                return Err(Error::record("", "empty pair_id"));
            }
            if !seen.insert(r.pair_id.as_str()) {
                return Err(Error::record(&r.pair_id, "duplicate pair_id"));
            }
            if r.reference_path.is_empty() || r.test_path.is_empty() {
                return Err(Error::record(&r.pair_id, "empty image path"));
            }
            if self.is_synthetic() && !(1..=MAX_CHANGES).contains(&r.boxes.len()) {
                return Err(Error::record(
                    &r.pair_id,
                    format!("{} boxes; synthetic pairs carry 1 to {MAX_CHANGES}", r.boxes.len()),
                ));
            }
            if let Some(b) = r.boxes.iter().find(|b| !b.is_valid()) {
                return Err(Error::record(&r.pair_id, format!("invalid box {b}")));
            }
        }
        Ok(())
    }
}

/// Parses a manifest and checks its schema.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let m: Manifest =
        serde_json::from_slice(&text).map_err(|source| Error::Json { path: path.into(), source })?;
    m.check_schema()?;
    Ok(m)
}

pub fn write_manifest(path: impl AsRef<Path>, m: &Manifest) -> Result<()> {
    let path = path.as_ref();
    let mut bytes =
        serde_json::to_vec_pretty(m).map_err(|source| Error::Json { path: path.into(), source })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Directory that relative record paths are resolved against.
pub fn manifest_root(manifest_path: &Path) -> PathBuf {
    manifest_path.parent().map(Path::to_path_buf).unwrap_or_default()
}
