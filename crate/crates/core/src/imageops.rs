//! Seeded compositing primitives.
//!
//! Every function here is pure: the same inputs (and seed, where one is
//! taken) always give byte-identical output.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::image::{Patch, Rect, RgbImage, SoftMask};
use crate::math::{ceil, exp, floor, rem_euclid, round, sincos};

/// Copies `r` out of `src` as a fully opaque patch.
pub fn crop_rect(src: &RgbImage, r: Rect) -> Result<Patch> {
    if !r.fits_in(src.width(), src.height()) {
        return Err(Error::OutOfBounds {
            x: r.x as i64,
            y: r.y as i64,
            w: r.w,
            h: r.h,
            width: src.width(),
            height: src.height(),
        });
    }
    let row_bytes = r.w as usize * 3;
    let stride = src.width() as usize * 3;
    let raw = src.as_raw();
    let mut data = Vec::with_capacity(row_bytes * r.h as usize);
    for y in r.y..r.y + r.h {
        let start = y as usize * stride + r.x as usize * 3;
        data.extend_from_slice(&raw[start..start + row_bytes]);
    }
    Ok(Patch::opaque(RgbImage::from_raw(r.w, r.h, data)?))
}

/// Rotates a patch counterclockwise (as displayed) by `angle_deg` degrees.
///
/// The output is sized to the tight bounding box of the rotated rectangle.
/// Multiples of 90° are exact pixel permutations; other angles resample the
/// image and mask bilinearly, and alpha is zero wherever the output pixel
/// center maps outside the source rectangle.
pub fn rotate_patch(p: &Patch, angle_deg: f64) -> Patch {
    let angle = rem_euclid(angle_deg, 360.0);
    if angle == 0.0 {
        return p.clone();
    }
    let quarter = angle / 90.0;
    if floor(quarter) == quarter {
        return rotate_quarter_turns(p, quarter as u32);
    }

    let (w, h) = (p.width() as f64, p.height() as f64);
    let (sin, cos) = sincos(angle.to_radians());
    let ow = ceil(w * cos.abs() + h * sin.abs() - 1e-6).max(1.0) as u32;
    let oh = ceil(w * sin.abs() + h * cos.abs() - 1e-6).max(1.0) as u32;
    let (cx, cy) = (w / 2.0, h / 2.0);
    let (ocx, ocy) = (ow as f64 / 2.0, oh as f64 / 2.0);

    let mut pixels = Vec::with_capacity(ow as usize * oh as usize * 3);
    let mut alpha = Vec::with_capacity(ow as usize * oh as usize);
    for oy in 0..oh {
        for ox in 0..ow {
            let x = ox as f64 + 0.5 - ocx;
            let y = oy as f64 + 0.5 - ocy;
            let sx = cx + cos * x - sin * y;
            let sy = cy + sin * x + cos * y;
            if sx >= 0.0 && sx < w && sy >= 0.0 && sy < h {
                let s = Bilinear::at(sx - 0.5, sy - 0.5, p.width(), p.height());
                let rgb = s.rgb(p.image());
                pixels.extend(rgb.iter().map(|&c| round_u8(c)));
                alpha.push(s.alpha(p.mask()) as f32);
            } else {
                pixels.extend_from_slice(&[0, 0, 0]);
                alpha.push(0.0);
            }
        }
    }
    let image = RgbImage::from_raw(ow, oh, pixels).expect("buffer sized for output");
    Patch::new(image, SoftMask::from_unchecked(ow, oh, alpha)).expect("same dimensions")
}

fn rotate_quarter_turns(p: &Patch, turns: u32) -> Patch {
    let (w, h) = (p.width(), p.height());
    let (ow, oh) = if turns % 2 == 1 { (h, w) } else { (w, h) };
    let mut image = RgbImage::new(ow, oh, [0; 3]).expect("nonzero dims");
    let mut alpha = vec![0.0f32; ow as usize * oh as usize];
    for j in 0..h {
        for i in 0..w {
            let (ox, oy) = match turns {
                1 => (j, w - 1 - i),
                2 => (w - 1 - i, h - 1 - j),
                _ => (h - 1 - j, i),
            };
            image.put(ox, oy, p.image().get(i, j));
            alpha[oy as usize * ow as usize + ox as usize] = p.mask().get(i, j);
        }
    }
    Patch::new(image, SoftMask::from_unchecked(ow, oh, alpha)).expect("same dimensions")
}

/// Grows a patch by `border` pixels on every side. The new image pixels
/// replicate the nearest edge pixel; the new mask pixels are transparent.
pub fn pad_patch(p: &Patch, border: u32) -> Patch {
    if border == 0 {
        return p.clone();
    }
    let (w, h) = (p.width(), p.height());
    let (ow, oh) = (w + 2 * border, h + 2 * border);
    let image = RgbImage::from_fn(ow, oh, |x, y| {
        let sx = (x as i64 - border as i64).clamp(0, w as i64 - 1) as u32;
        let sy = (y as i64 - border as i64).clamp(0, h as i64 - 1) as u32;
        p.image().get(sx, sy)
    })
    .expect("nonzero dims");
    let mut alpha = vec![0.0f32; ow as usize * oh as usize];
    for y in 0..h {
        for x in 0..w {
            alpha[(y + border) as usize * ow as usize + (x + border) as usize] = p.mask().get(x, y);
        }
    }
    Patch::new(image, SoftMask::from_unchecked(ow, oh, alpha)).expect("same dimensions")
}

/// Bilinear resize of image and mask to `width`×`height`.
pub fn resize_patch(p: &Patch, width: u32, height: u32) -> Result<Patch> {
    if width == 0 || height == 0 {
        return Err(invalid("size", alloc::format!("{width}x{height}")));
    }
    if width == p.width() && height == p.height() {
        return Ok(p.clone());
    }
    let fx = p.width() as f64 / width as f64;
    let fy = p.height() as f64 / height as f64;
    let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
    let mut alpha = Vec::with_capacity(width as usize * height as usize);
    for oy in 0..height {
        for ox in 0..width {
            let sx = (ox as f64 + 0.5) * fx - 0.5;
            let sy = (oy as f64 + 0.5) * fy - 0.5;
            let s = Bilinear::at(sx, sy, p.width(), p.height());
            pixels.extend(s.rgb(p.image()).iter().map(|&c| round_u8(c)));
            alpha.push(s.alpha(p.mask()) as f32);
        }
    }
    Patch::new(
        RgbImage::from_raw(width, height, pixels)?,
        SoftMask::from_unchecked(width, height, alpha),
    )
}

/// Clamp-to-edge bilinear sampling weights around a continuous position in
/// pixel-center coordinates.
struct Bilinear {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
    tx: f64,
    ty: f64,
}

impl Bilinear {
    fn at(x: f64, y: f64, width: u32, height: u32) -> Self {
        let x = x.clamp(0.0, (width - 1) as f64);
        let y = y.clamp(0.0, (height - 1) as f64);
        let x0 = floor(x) as u32;
        let y0 = floor(y) as u32;
        Self {
            x0,
            y0,
            x1: (x0 + 1).min(width - 1),
            y1: (y0 + 1).min(height - 1),
            tx: x - x0 as f64,
            ty: y - y0 as f64,
        }
    }

    #[inline]
    fn mix(&self, a: f64, b: f64, c: f64, d: f64) -> f64 {
        let top = a + (b - a) * self.tx;
        let bottom = c + (d - c) * self.tx;
        top + (bottom - top) * self.ty
    }

    fn rgb(&self, img: &RgbImage) -> [f64; 3] {
        let a = img.get(self.x0, self.y0);
        let b = img.get(self.x1, self.y0);
        let c = img.get(self.x0, self.y1);
        let d = img.get(self.x1, self.y1);
        core::array::from_fn(|k| self.mix(a[k] as f64, b[k] as f64, c[k] as f64, d[k] as f64))
    }

    fn alpha(&self, m: &SoftMask) -> f64 {
        self.mix(
            m.get(self.x0, self.y0) as f64,
            m.get(self.x1, self.y0) as f64,
            m.get(self.x0, self.y1) as f64,
            m.get(self.x1, self.y1) as f64,
        )
    }
}

/// Normalized 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(3·sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = feather_radius(sigma) as i64;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|d| exp(-((d * d) as f64) / denom))
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Kernel radius used by [`feather_mask`]: `ceil(3·sigma)`.
pub fn feather_radius(sigma: f64) -> u32 {
    ceil(3.0 * sigma) as u32
}

/// Blurs the mask with a normalized Gaussian of standard deviation `sigma`
/// pixels (separable, clamp-to-edge borders).
pub fn feather_mask(m: &SoftMask, sigma: f64) -> Result<SoftMask> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(invalid("sigma", alloc::format!("{sigma} must be finite and >= 0")));
    }
    if sigma == 0.0 {
        return Ok(m.clone());
    }
    let taps = gaussian_kernel(sigma);
    let r = (taps.len() / 2) as i64;
    let (w, h) = (m.width() as i64, m.height() as i64);
    let src = m.as_slice();

    let mut horiz = vec![0.0f64; src.len()];
    for y in 0..h {
        let row = &src[(y * w) as usize..][..w as usize];
        for x in 0..w {
            horiz[(y * w + x) as usize] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * row[(x + k as i64 - r).clamp(0, w - 1) as usize] as f64)
                .sum();
        }
    }
    let mut out = vec![0.0f32; src.len()];
    for y in 0..h {
        for x in 0..w {
            let v: f64 = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * horiz[((y + k as i64 - r).clamp(0, h - 1) * w + x) as usize])
                .sum();
            out[(y * w + x) as usize] = v as f32;
        }
    }
    Ok(SoftMask::from_unchecked(m.width(), m.height(), out))
}

/// Alpha-blends `p` onto `background` with the patch's top-left corner at
/// `at` (which may be negative as long as the mask support lands inside).
///
/// Returns the composite and the tight rect of pasted pixels with alpha > 0.
/// Pixels outside that support are copied from the background unchanged.
pub fn composite(background: &RgbImage, p: &Patch, at: (i64, i64)) -> Result<(RgbImage, Rect)> {
    let support = p.mask().support_bounds().ok_or(Error::EmptyChange)?;
    let x0 = at.0 + support.x as i64;
    let y0 = at.1 + support.y as i64;
    if x0 < 0
        || y0 < 0
        || x0 + support.w as i64 > background.width() as i64
        || y0 + support.h as i64 > background.height() as i64
    {
        return Err(Error::Placement);
    }
    let mut out = background.clone();
    for py in support.y..support.y + support.h {
        for px in support.x..support.x + support.w {
            let a = p.mask().get(px, py) as f64;
            if a <= 0.0 {
                continue;
            }
            let bx = (at.0 + px as i64) as u32;
            let by = (at.1 + py as i64) as u32;
            let fg = p.image().get(px, py);
            let bg = out.get(bx, by);
            let blended: [u8; 3] =
                core::array::from_fn(|k| round_u8(a * fg[k] as f64 + (1.0 - a) * bg[k] as f64));
            out.put(bx, by, blended);
        }
    }
    Ok((out, Rect::new(x0 as u32, y0 as u32, support.w, support.h)))
}

/// Adds independent zero-mean Gaussian noise of standard deviation `sigma`
/// (intensity units) to every channel sample, rounding and clamping to
/// `[0, 255]`.
pub fn add_gaussian_noise(img: &RgbImage, sigma: f64, seed: u64) -> Result<RgbImage> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(invalid("sigma", alloc::format!("{sigma} must be finite and >= 0")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid("sigma", alloc::format!("{e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .as_raw()
        .iter()
        .map(|&v| round_u8(v as f64 + normal.sample(&mut rng)))
        .collect();
    RgbImage::from_raw(img.width(), img.height(), data)
}

/// Valid range of a per-channel jitter gain.
pub const JITTER_GAIN_RANGE: (f64, f64) = (0.5, 1.5);

/// Scales each channel by its gain, rounding and clamping to `[0, 255]`.
pub fn color_jitter(img: &RgbImage, gains: [f64; 3]) -> Result<RgbImage> {
    let (lo, hi) = JITTER_GAIN_RANGE;
    if let Some(g) = gains.iter().find(|g| !(**g >= lo && **g <= hi)) {
        return Err(invalid("gain", alloc::format!("{g} is outside [{lo}, {hi}]")));
    }
    let data = img
        .as_raw()
        .chunks_exact(3)
        .flat_map(|px| {
            let out: [u8; 3] = core::array::from_fn(|k| round_u8(px[k] as f64 * gains[k]));
            out
        })
        .collect();
    RgbImage::from_raw(img.width(), img.height(), data)
}

#[inline]
fn round_u8(v: f64) -> u8 {
    round(v).clamp(0.0, 255.0) as u8
}
