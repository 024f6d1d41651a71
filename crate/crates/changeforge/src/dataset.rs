//! Writing generated datasets to disk and reading datasets back.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use changeforge_core::synth::{generate_pair, pair_rng, ChangeKind, GenerationConfig, Pools};
use changeforge_core::{Patch, RgbImage};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{image_dimensions, load_background_pool, load_instance_pool, read_rgb, write_png};
use crate::manifest::{manifest_root, read_manifest, write_manifest, ImagePairRecord, Manifest};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Fresh attempts per pair, each on its own random stream, before the whole
/// run fails.
pub const PAIR_RETRIES: u32 = 8;

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

/// What a run produced, beyond the manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationReport {
    /// Kinds of the pasted changes, per pair.
    pub kinds: Vec<Vec<ChangeKind>>,
    /// Pairs that needed more than one attempt.
    pub retried_pairs: usize,
}

impl GenerationReport {
    pub fn kind_counts(&self) -> BTreeMap<ChangeKind, usize> {
        let mut counts = BTreeMap::new();
        for k in self.kinds.iter().flatten() {
            *counts.entry(*k).or_insert(0) += 1;
        }
        counts
    }
}

pub fn pair_id(strategy: &str, index: usize) -> String {
    format!("{strategy}_{index:05}")
}

/// Loads the pools named in `cfg` (relative paths resolve against `base`).
pub fn load_pools(cfg: &GenerationConfig, base: &Path) -> Result<(Vec<RgbImage>, Vec<Patch>)> {
    let backgrounds = load_background_pool(base.join(&cfg.source_pool_dir), cfg.image_size)?;
    let instances = match &cfg.instance_pool_dir {
        Some(dir) if cfg.uses(ChangeKind::InstanceCutout) => load_instance_pool(base.join(dir))?,
        _ => Vec::new(),
    };
    Ok((backgrounds, instances))
}

/// Generates `cfg.count` pairs into `out_dir` and writes the manifest.
pub fn generate_dataset(
    cfg: &GenerationConfig,
    pool_base: &Path,
    out_dir: &Path,
    opts: &GenerateOptions,
) -> Result<(Manifest, GenerationReport)> {
    cfg.validate()?;
    let (backgrounds, instances) = load_pools(cfg, pool_base)?;
    let pools = Pools {
        backgrounds: &backgrounds,
        instances: &instances,
    };
    generate_dataset_with_pools(cfg, pools, out_dir, opts)
}

/// As [`generate_dataset`], with pools already in memory.
pub fn generate_dataset_with_pools(
    cfg: &GenerationConfig,
    pools: Pools<'_>,
    out_dir: &Path,
    opts: &GenerateOptions,
) -> Result<(Manifest, GenerationReport)> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n);
    }
    let workers = builder.build().map_err(|e| Error::format(out_dir, format!("worker pool: {e}")))?;

    let results: Vec<Result<(ImagePairRecord, Vec<ChangeKind>, bool)>> = workers.install(|| {
        (0..cfg.count)
            .into_par_iter()
            .map(|index| write_pair(cfg, pools, out_dir, index))
            .collect()
    });

    let mut records = Vec::with_capacity(cfg.count);
    let mut report = GenerationReport::default();
    for r in results {
        let (record, kinds, retried) = r?;
        records.push(record);
        report.kinds.push(kinds);
        report.retried_pairs += retried as usize;
    }
    let manifest = Manifest::synthetic(cfg.clone(), records);
    write_manifest(out_dir.join(MANIFEST_FILE), &manifest)?;
    log::info!(
        "wrote {} pairs to {} ({} retried)",
        manifest.records.len(),
        out_dir.display(),
        report.retried_pairs
    );
    Ok((manifest, report))
}

fn write_pair(
    cfg: &GenerationConfig,
    pools: Pools<'_>,
    out_dir: &Path,
    index: usize,
) -> Result<(ImagePairRecord, Vec<ChangeKind>, bool)> {
    let mut last = None;
    for attempt in 0..PAIR_RETRIES {
        match generate_pair(cfg, pools, &mut pair_rng(cfg.seed, index as u64, attempt)) {
            Ok(pair) => {
                let id = pair_id(&cfg.strategy, index);
                let reference_path = format!("{id}_ref.png");
                let test_path = format!("{id}_test.png");
                write_png(out_dir.join(&reference_path), &pair.reference)?;
                write_png(out_dir.join(&test_path), &pair.test)?;
                let record = ImagePairRecord {
                    reference_path,
                    test_path,
                    boxes: pair.boxes(),
                    pair_id: id,
                    strategy_tag: cfg.strategy.clone(),
                };
                let kinds = pair.changes.iter().map(|c| c.kind).collect();
                return Ok((record, kinds, attempt > 0));
            }
            Err(e @ changeforge_core::Error::Generation(_)) | Err(e @ changeforge_core::Error::Placement) => {
                log::warn!("pair {index} attempt {attempt}: {e}; resampling");
                last = Some(e);
            }
            Err(e) => return Err(Error::Generation { index, source: e }),
        }
    }
    Err(Error::Generation {
        index,
        source: last.expect("at least one attempt"),
    })
}

/// A manifest whose records have been checked against the files on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn records(&self) -> &[ImagePairRecord] {
        &self.manifest.records
    }

    pub fn reference_path(&self, r: &ImagePairRecord) -> PathBuf {
        self.root.join(&r.reference_path)
    }

    pub fn test_path(&self, r: &ImagePairRecord) -> PathBuf {
        self.root.join(&r.test_path)
    }

    /// Reference and test images of one record.
    pub fn load_pair(&self, r: &ImagePairRecord) -> Result<(RgbImage, RgbImage)> {
        let reference = read_rgb(self.reference_path(r)).map_err(|e| Error::record(&r.pair_id, e.to_string()))?;
        let test = read_rgb(self.test_path(r)).map_err(|e| Error::record(&r.pair_id, e.to_string()))?;
        Ok((reference, test))
    }

    /// Image size of one record, read from the reference header.
    pub fn image_size(&self, r: &ImagePairRecord) -> Result<(u32, u32)> {
        image_dimensions(self.reference_path(r)).map_err(|e| Error::record(&r.pair_id, e.to_string()))
    }
}

/// Reads a manifest and checks every record against its files: both images
/// exist, share dimensions, and contain every box.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let manifest_path = manifest_path.as_ref();
    let manifest = read_manifest(manifest_path)?;
    let dataset = Dataset {
        root: manifest_root(manifest_path),
        manifest,
    };
    for r in dataset.records() {
        let dims = |p: PathBuf| image_dimensions(&p).map_err(|e| Error::record(&r.pair_id, e.to_string()));
        let a = dims(dataset.reference_path(r))?;
        let b = dims(dataset.test_path(r))?;
        if a != b {
            return Err(Error::record(
                &r.pair_id,
                format!("reference is {}x{} but test is {}x{}", a.0, a.1, b.0, b.1),
            ));
        }
        if let Some(b) = r.boxes.iter().find(|b| !b.is_within(a.0 as f64, a.1 as f64)) {
            return Err(Error::record(&r.pair_id, format!("box {b} leaves the {}x{} image", a.0, a.1)));
        }
    }
    Ok(dataset)
}
