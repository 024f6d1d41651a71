//! The `changeforge` command line.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use changeforge_core::codec::{decode_maps, encode_targets, peak_collisions, CodecConfig};
use changeforge_core::metrics::{average_precision, generalization_distance, DEFAULT_IOU_THRESHOLD};
use changeforge_core::synth::GenerationConfig;
use clap::{Args, Parser, Subcommand};

use crate::dataset::{generate_dataset, load_dataset, GenerateOptions};
use crate::detections::{group_by_pair, read_detections, write_detections, DetectionRecord};
use crate::error::Error;
use crate::inspect::side_by_side;
use crate::io::write_png;
use crate::manifest::read_manifest;
use crate::matrix::{read_results_csv, write_distances};
use crate::tensor::{read_maps, write_maps};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "changeforge", version, about = "Synthetic change-detection datasets and their evaluation")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset and its manifest from a config file.
    Generate(GenerateArgs),
    /// Write ground-truth target maps for every pair in a manifest.
    Encode(EncodeArgs),
    /// Decode prediction maps into a detections file.
    Decode(DecodeArgs),
    /// Score detections against a manifest (AP at IoU 0.5).
    Eval(EvalArgs),
    /// Generalization distance of every row of a results CSV.
    Distance(DistanceArgs),
    /// Render one pair side by side with its boxes.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generation config (JSON). Relative pool directories resolve against
    /// the config file's directory.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for images and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed; overrides CHANGEFORGE_SEED and the config.
    #[arg(long, env = "CHANGEFORGE_SEED")]
    pub seed: Option<u64>,
    /// Number of pairs; overrides the config.
    #[arg(long)]
    pub count: Option<usize>,
    /// Worker threads (default: one per core).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Background/source image directory; overrides the config.
    #[arg(long)]
    pub source_pool: Option<PathBuf>,
    /// Instance cutout directory; overrides the config.
    #[arg(long)]
    pub instance_pool: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for `<pair_id>_{hm,wh,offset}.tensor`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding `<pair_id>_{hm,wh,offset}.tensor`.
    #[arg(long)]
    pub maps: PathBuf,
    /// Detections JSON to write (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Heatmap peaks must exceed this score.
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f64,
    #[arg(long, default_value_t = 100)]
    pub max_detections: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,
    /// Result JSON to write (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    /// Results CSV: testset header, method label first column.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Distances CSV to write (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub pair_id: String,
    /// PNG to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<changeforge_core::Error> for Failure {
    fn from(e: changeforge_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    let outcome = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Eval(a) => eval(a),
        Command::Distance(a) => distance(a),
        Command::Inspect(a) => inspect(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Outcome {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| Error::io(path, e).into()),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| Error::io("<stdout>", e).into()),
    }
}

fn read_config(path: &Path) -> Result<GenerationConfig, Failure> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Failure::Data(Error::Json { path: path.into(), source }))
}

fn generate(a: &GenerateArgs) -> Outcome {
    let mut cfg = read_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(count) = a.count {
        if count == 0 {
            return Err(Failure::Usage("--count must be at least 1".into()));
        }
        cfg.count = count;
    }
    if let Some(dir) = &a.source_pool {
        cfg.source_pool_dir = dir.to_string_lossy().into_owned();
    }
    if let Some(dir) = &a.instance_pool {
        cfg.instance_pool_dir = Some(dir.to_string_lossy().into_owned());
    }
    let base = a.config.parent().unwrap_or(Path::new(""));
    let opts = GenerateOptions {
        threads: a.threads.map(usize::from),
    };
    let (manifest, report) = generate_dataset(&cfg, base, &a.out, &opts)?;
    for (kind, n) in report.kind_counts() {
        log::info!("{kind:?}: {n}");
    }
    println!("{} pairs -> {}", manifest.records.len(), a.out.join(crate::dataset::MANIFEST_FILE).display());
    Ok(())
}

fn codec_config() -> CodecConfig {
    CodecConfig::default()
}

// Boxes live in image pixels; maps live in the fixed network input space.
fn input_scale(cfg: &CodecConfig, (w, h): (u32, u32)) -> (f64, f64) {
    let s = cfg.input_resolution as f64;
    (s / w as f64, s / h as f64)
}

fn encode(a: &EncodeArgs) -> Outcome {
    let cfg = codec_config();
    let ds = load_dataset(&a.manifest)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    for r in ds.records() {
        let (sx, sy) = input_scale(&cfg, ds.image_size(r)?);
        let boxes: Vec<_> = r.boxes.iter().map(|b| b.scaled(sx, sy)).collect();
        let collisions = peak_collisions(&boxes, &cfg);
        if collisions > 0 {
            log::warn!("pair {}: {collisions} boxes share a peak cell", r.pair_id);
        }
        let maps = encode_targets(&boxes, &cfg).map_err(|e| Error::record(&r.pair_id, e.to_string()))?;
        write_maps(&a.out, &r.pair_id, &maps)?;
    }
    println!("encoded {} pairs -> {}", ds.records().len(), a.out.display());
    Ok(())
}

fn decode(a: &DecodeArgs) -> Outcome {
    let cfg = CodecConfig {
        peak_threshold: a.threshold,
        max_detections: a.max_detections,
        ..codec_config()
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let ds = load_dataset(&a.manifest)?;
    let mut out = Vec::new();
    for r in ds.records() {
        let (sx, sy) = input_scale(&cfg, ds.image_size(r)?);
        let maps = read_maps(&a.maps, &r.pair_id)?;
        let dets = decode_maps(&maps, &cfg).map_err(|e| Error::record(&r.pair_id, e.to_string()))?;
        for mut d in dets {
            d.bbox = d.bbox.scaled(1.0 / sx, 1.0 / sy);
            out.push(DetectionRecord::new(&r.pair_id, &d));
        }
    }
    match &a.out {
        Some(path) => write_detections(path, &out)?,
        None => {
            let mut bytes = serde_json::to_vec_pretty(&out).expect("detections serialize");
            bytes.push(b'\n');
            emit(None, &bytes)?;
        }
    }
    Ok(())
}

fn eval(a: &EvalArgs) -> Outcome {
    if !(0.0..=1.0).contains(&a.iou) {
        return Err(Failure::Usage("--iou must lie in [0, 1]".into()));
    }
    let manifest = read_manifest(&a.manifest)?;
    let records = read_detections(&a.detections)?;
    let (dets, gts) = group_by_pair(&records, &manifest)?;
    let result = average_precision(&dets, &gts, a.iou)?;
    let mut bytes = serde_json::to_vec_pretty(&result).expect("result serializes");
    bytes.push(b'\n');
    emit(a.out.as_deref(), &bytes)
}

fn distance(a: &DistanceArgs) -> Outcome {
    let m = read_results_csv(&a.matrix)?;
    let d = generalization_distance(&m);
    let mut bytes = Vec::new();
    write_distances(&mut bytes, &m, &d).map_err(|source| Error::Csv {
        path: a.out.clone().unwrap_or_else(|| "<stdout>".into()),
        source,
    })?;
    emit(a.out.as_deref(), &bytes)
}

fn inspect(a: &InspectArgs) -> Outcome {
    let ds = load_dataset(&a.manifest)?;
    let r = ds
        .manifest
        .record(&a.pair_id)
        .ok_or_else(|| Error::record(&a.pair_id, "not in the manifest"))?;
    let (reference, test) = ds.load_pair(r)?;
    write_png(&a.out, &side_by_side(&reference, &test, &r.boxes))?;
    Ok(())
}
