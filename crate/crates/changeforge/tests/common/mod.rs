#![allow(dead_code)]

use std::path::{Path, PathBuf};

use changeforge::core::synth::GenerationConfig;
use changeforge::core::RgbImage;
use changeforge::io::write_png;

/// Deterministic textured background; `salt` varies the pattern.
pub fn background(w: u32, h: u32, salt: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        let v = (x ^ (y * 7)).wrapping_mul(2654435761).wrapping_add(salt.wrapping_mul(97));
        [
            (v >> 24) as u8,
            ((x * 3 + salt * 40) % 256) as u8,
            ((y * 5 + x / 3 + salt * 13) % 256) as u8,
        ]
    })
    .unwrap()
}

/// Writes `n` backgrounds (deliberately not 512x512) into `dir`.
pub fn write_backgrounds(dir: &Path, n: u32) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        write_png(dir.join(format!("bg{i:02}.png")), &background(600 + 10 * i, 450, i + 1)).unwrap();
    }
}

/// Writes `n` RGBA elliptical cutouts into `dir`.
pub fn write_instances(dir: &Path, n: u32) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        let (w, h) = (40 + 30 * i, 60 + 17 * i);
        let img = image::RgbaImage::from_fn(w, h, |x, y| {
            let dx = (x as f64 + 0.5) / w as f64 - 0.5;
            let dy = (y as f64 + 0.5) / h as f64 - 0.5;
            let a = if dx * dx + dy * dy <= 0.2 { 255 } else { 0 };
            image::Rgba([(x * 5) as u8, 200, (y * 3) as u8, a])
        });
        img.save(dir.join(format!("inst{i:02}.png"))).unwrap();
    }
}

/// Pools under `root/pools` plus the preset config pointing at them.
pub fn setup(root: &Path, exp: u8, count: usize, seed: u64) -> GenerationConfig {
    write_backgrounds(&root.join("pools/backgrounds"), 4);
    write_instances(&root.join("pools/instances"), 3);
    let mut cfg = GenerationConfig::preset(exp, "pools/backgrounds", Some("pools/instances")).unwrap();
    cfg.count = count;
    cfg.seed = seed;
    cfg
}

pub fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets")
}

pub fn table3_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/table3.csv")
}

/// Every regular file under `dir` with its bytes, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
