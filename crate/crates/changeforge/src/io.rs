//! PNG reading and writing, and loading of background and cutout pools.

use std::fs;
use std::path::{Path, PathBuf};

use changeforge_core::{Patch, RgbImage, SoftMask};
use image::imageops::FilterType;

use crate::error::{Error, Result};

const POOL_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn to_core(img: image::RgbImage, path: &Path) -> Result<RgbImage> {
    let (w, h) = img.dimensions();
    RgbImage::from_raw(w, h, img.into_raw()).map_err(|e| Error::format(path, e.to_string()))
}

fn open(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| Error::Image { path: path.into(), source })
}

/// Reads any supported image as 8-bit RGB.
pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    to_core(open(path)?.into_rgb8(), path)
}

/// Writes an 8-bit RGB PNG.
pub fn write_png(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    image::save_buffer_with_format(
        path,
        img.as_raw(),
        img.width(),
        img.height(),
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .map_err(|source| Error::Image { path: path.into(), source })
}

/// Width and height from the file header, without decoding pixels.
pub fn image_dimensions(path: impl AsRef<Path>) -> Result<(u32, u32)> {
    let path = path.as_ref();
    image::image_dimensions(path).map_err(|source| Error::Image { path: path.into(), source })
}

/// Reads an RGBA image as a patch whose mask is the alpha channel.
pub fn read_cutout(path: impl AsRef<Path>) -> Result<Patch> {
    let path = path.as_ref();
    let rgba = open(path)?.into_rgba8();
    let (w, h) = rgba.dimensions();
    let mut rgb = Vec::with_capacity((w * h * 3) as usize);
    let mut alpha = Vec::with_capacity((w * h) as usize);
    for px in rgba.pixels() {
        rgb.extend_from_slice(&px.0[..3]);
        alpha.push(px.0[3] as f32 / 255.0);
    }
    let image = RgbImage::from_raw(w, h, rgb)?;
    Ok(Patch::new(image, SoftMask::from_raw(w, h, alpha)?)?)
}

/// Image files directly inside `dir`, sorted by name.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| POOL_EXTENSIONS.contains(&e.as_str())) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every image in `dir`, resized to `size` (`[width, height]`).
pub fn load_background_pool(dir: impl AsRef<Path>, size: [u32; 2]) -> Result<Vec<RgbImage>> {
    let dir = dir.as_ref();
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(Error::format(dir, "no images in background pool"));
    }
    files
        .iter()
        .map(|path| {
            let mut img = open(path)?.into_rgb8();
            if img.dimensions() != (size[0], size[1]) {
                img = image::imageops::resize(&img, size[0], size[1], FilterType::Triangle);
            }
            to_core(img, path)
        })
        .collect()
}

/// Loads every RGBA cutout in `dir` at its own size.
pub fn load_instance_pool(dir: impl AsRef<Path>) -> Result<Vec<Patch>> {
    let dir = dir.as_ref();
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(Error::format(dir, "no images in instance pool"));
    }
    files.iter().map(read_cutout).collect()
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
