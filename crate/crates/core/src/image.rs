//! Pixel containers shared by the compositing and shape modules.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Row-major 8-bit RGB image.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl core::fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("RgbImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RgbImage {
    /// A `width`×`height` image filled with `fill`.
    pub fn new(width: u32, height: u32, fill: [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&fill);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::ShapeMismatch(alloc::format!(
                "RGB buffer of {} bytes for {width}x{height} (expected {expected})",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    /// Pixel at (`x`, `y`). Panics when out of range.
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.index(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, px: [u8; 3]) {
        let i = self.index(x, y);
        self.data[i..i + 3].copy_from_slice(&px);
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }
}

/// Per-pixel coverage in `[0, 1]`.
#[derive(Clone, PartialEq)]
pub struct SoftMask {
    width: u32,
    height: u32,
    alpha: Vec<f32>,
}

impl core::fmt::Debug for SoftMask {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SoftMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl SoftMask {
    pub fn filled(width: u32, height: u32, value: f32) -> Result<Self> {
        check_dims(width, height)?;
        check_alpha(value)?;
        Ok(Self {
            width,
            height,
            alpha: vec![value; width as usize * height as usize],
        })
    }

    pub fn from_raw(width: u32, height: u32, alpha: Vec<f32>) -> Result<Self> {
        check_dims(width, height)?;
        if alpha.len() != width as usize * height as usize {
            return Err(Error::ShapeMismatch(alloc::format!(
                "mask buffer of {} values for {width}x{height}",
                alpha.len()
            )));
        }
        for &a in &alpha {
            check_alpha(a)?;
        }
        Ok(Self {
            width,
            height,
            alpha,
        })
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn as_slice(&self) -> &[f32] {
        &self.alpha
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.alpha[y as usize * self.width as usize + x as usize]
    }

    /// Sum of all alpha values.
    pub fn mass(&self) -> f64 {
        self.alpha.iter().map(|&a| a as f64).sum()
    }

    /// Number of pixels with alpha > 0.
    pub fn support_area(&self) -> usize {
        self.alpha.iter().filter(|&&a| a > 0.0).count()
    }

    /// Tight bounding rect of the pixels with alpha > 0, if any.
    pub fn support_bounds(&self) -> Option<Rect> {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        let mut any = false;
        for y in 0..self.height {
            let row = &self.alpha[y as usize * self.width as usize..][..self.width as usize];
            for (x, &a) in row.iter().enumerate() {
                if a > 0.0 {
                    let x = x as u32;
                    any = true;
                    x0 = x0.min(x);
                    x1 = x1.max(x);
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                }
            }
        }
        any.then(|| Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    // Values are produced by convex combinations of valid alphas; the clamp
    // absorbs float rounding just outside [0, 1].
    pub(crate) fn from_unchecked(width: u32, height: u32, alpha: Vec<f32>) -> Self {
        debug_assert_eq!(alpha.len(), width as usize * height as usize);
        let alpha = alpha.into_iter().map(|a| a.clamp(0.0, 1.0)).collect();
        Self {
            width,
            height,
            alpha,
        }
    }
}

/// An image region together with its coverage mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    image: RgbImage,
    mask: SoftMask,
}

impl Patch {
    pub fn new(image: RgbImage, mask: SoftMask) -> Result<Self> {
        if image.width() != mask.width() || image.height() != mask.height() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "patch image {}x{} vs mask {}x{}",
                image.width(),
                image.height(),
                mask.width(),
                mask.height()
            )));
        }
        Ok(Self { image, mask })
    }

    /// Fully opaque patch.
    pub fn opaque(image: RgbImage) -> Self {
        let mask = SoftMask::filled(image.width(), image.height(), 1.0)
            .expect("image dimensions are already validated");
        Self { image, mask }
    }

    #[inline]
    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    #[inline]
    pub fn mask(&self) -> &SoftMask {
        &self.mask
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.image.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.image.height
    }

    pub fn into_parts(self) -> (RgbImage, SoftMask) {
        (self.image, self.mask)
    }
}

/// Axis-aligned pixel rectangle; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    #[inline]
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    #[inline]
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    /// Exclusive right edge.
    #[inline]
    pub fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    /// Exclusive bottom edge.
    #[inline]
    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }

    pub fn contains_point(&self, x: u32, y: u32) -> bool {
        x >= self.x && y >= self.y && (x as u64) < self.right() && (y as u64) < self.bottom()
    }

    /// True when the rect is non-empty and lies inside a `width`×`height` image.
    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.w >= 1 && self.h >= 1 && self.right() <= width as u64 && self.bottom() <= height as u64
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(invalid("dimensions", alloc::format!("{width}x{height} has a zero side")));
    }
    Ok(())
}

fn check_alpha(a: f32) -> Result<()> {
    if !(0.0..=1.0).contains(&a) {
        return Err(invalid("alpha", alloc::format!("{a} is outside [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sized_images_are_rejected() {
        assert!(RgbImage::new(0, 4, [0; 3]).is_err());
        assert!(SoftMask::filled(3, 0, 1.0).is_err());
    }

    #[test]
    fn raw_buffers_are_length_checked() {
        assert!(RgbImage::from_raw(2, 2, vec![0; 11]).is_err());
        assert!(RgbImage::from_raw(2, 2, vec![0; 12]).is_ok());
        assert!(SoftMask::from_raw(2, 1, vec![0.5, 1.5]).is_err());
    }

    #[test]
    fn support_bounds_is_tight() {
        let mut alpha = vec![0.0; 6 * 5];
        alpha[6 + 2] = 0.1;
        alpha[3 * 6 + 4] = 1.0;
        let m = SoftMask::from_raw(6, 5, alpha).unwrap();
        assert_eq!(m.support_bounds(), Some(Rect::new(2, 1, 3, 3)));
        assert_eq!(SoftMask::filled(3, 3, 0.0).unwrap().support_bounds(), None);
    }

    #[test]
    fn patch_dimensions_must_agree() {
        let img = RgbImage::new(4, 3, [1, 2, 3]).unwrap();
        let mask = SoftMask::filled(3, 4, 1.0).unwrap();
        assert!(matches!(Patch::new(img, mask), Err(Error::ShapeMismatch(_))));
    }
}
