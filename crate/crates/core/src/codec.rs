//! Center-point codec: change boxes to ground-truth maps and prediction maps
//! back to scored boxes.
//!
//! Maps live on an `R×R` grid, one cell per `stride` input pixels. A box
//! with center `p` owns the peak cell `⌊p / stride⌋`. The heatmap holds a
//! unit Gaussian bump around every peak (overlapping bumps merge by
//! element-wise maximum), the size map holds `(w, h)` in input pixels at the
//! peak, and the offset map holds the fractional part `p / stride − ⌊p /
//! stride⌋` lost to the integer division.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::boxes::ChangeBox;
use crate::error::{invalid, Error, Result};
use crate::math::{exp, floor, sqrt};

/// Dense row-major `height × width × channels` grid of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {height}x{width}x{channels} map",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `[height, width, channels]`.
    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    pub(crate) fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

/// The heatmap / size / offset triple, used both for targets and
/// predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMaps {
    pub hm: FeatureMap,
    pub wh: FeatureMap,
    pub offset: FeatureMap,
}

impl TargetMaps {
    pub fn zeros(resolution: usize) -> Self {
        Self {
            hm: FeatureMap::zeros(resolution, resolution, 1),
            wh: FeatureMap::zeros(resolution, resolution, 2),
            offset: FeatureMap::zeros(resolution, resolution, 2),
        }
    }

    /// Checks the three maps share one `R×R` grid with 1, 2 and 2 channels.
    pub fn validate(&self, resolution: usize) -> Result<()> {
        let expect = [
            ("hm", &self.hm, 1usize),
            ("wh", &self.wh, 2),
            ("offset", &self.offset, 2),
        ];
        for (name, map, channels) in expect {
            if map.shape() != [resolution, resolution, channels] {
                return Err(Error::ShapeMismatch(format!(
                    "{name} map is {:?}, expected {:?}",
                    map.shape(),
                    [resolution, resolution, channels]
                )));
            }
        }
        Ok(())
    }

    /// Cells whose heatmap value is exactly 1, in row-major order.
    pub fn peak_cells(&self) -> Vec<(usize, usize)> {
        peak_cells(&self.hm)
    }
}

/// Cells of a heatmap equal to 1, in row-major order.
pub fn peak_cells(hm: &FeatureMap) -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    for y in 0..hm.height() {
        for x in 0..hm.width() {
            if hm.get(x, y, 0) == 1.0 {
                cells.push((x, y));
            }
        }
    }
    cells
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CodecConfig {
    pub input_resolution: usize,
    pub map_resolution: usize,
    pub stride: usize,
    pub peak_threshold: f64,
    pub max_detections: usize,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            input_resolution: 512,
            map_resolution: 128,
            stride: 4,
            peak_threshold: 0.3,
            max_detections: 100,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.map_resolution == 0 {
            return Err(invalid("codec", "stride and map resolution must be positive"));
        }
        if self.input_resolution != self.stride * self.map_resolution {
            return Err(invalid(
                "codec",
                format!(
                    "input resolution {} != stride {} x map resolution {}",
                    self.input_resolution, self.stride, self.map_resolution
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.peak_threshold) {
            return Err(invalid("peak_threshold", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// A decoded box with its heatmap confidence.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Detection {
    #[serde(flatten)]
    pub bbox: ChangeBox,
    pub score: f64,
}

/// Minimum IoU a shifted box must keep with the original.
pub const RADIUS_MIN_IOU: f64 = 0.7;

/// Largest diagonal shift `r` (in cells) such that a `w`×`h` box moved by
/// `(r, r)` keeps IoU ≥ 0.7 with itself.
///
/// The overlap is `(w − r)(h − r)` and the union `2wh − overlap`, so the
/// condition is `(w − r)(h − r) ≥ k·wh` with `k = 2t / (1 + t)`; `r` is the
/// smaller root of that quadratic.
pub fn gaussian_radius(w_cells: f64, h_cells: f64) -> f64 {
    let t = RADIUS_MIN_IOU;
    let k = 2.0 * t / (1.0 + t);
    let sum = w_cells + h_cells;
    let disc = sum * sum - 4.0 * w_cells * h_cells * (1.0 - k);
    (sum - sqrt(disc.max(0.0))) / 2.0
}

/// Heatmap standard deviation, in cells, for a box of `w`×`h` input pixels:
/// `max(1, radius / 3)`.
pub fn gaussian_sigma(w: f64, h: f64, stride: usize) -> f64 {
    let s = stride as f64;
    (gaussian_radius(w / s, h / s) / 3.0).max(1.0)
}

/// Builds the ground-truth maps for a set of boxes.
pub fn encode_targets(boxes: &[ChangeBox], cfg: &CodecConfig) -> Result<TargetMaps> {
    cfg.validate()?;
    let res = cfg.map_resolution;
    let stride = cfg.stride as f64;
    let input = cfg.input_resolution as f64;
    let mut maps = TargetMaps::zeros(res);
    let mut owner: Vec<Option<usize>> = vec![None; res * res];

    for (i, b) in boxes.iter().enumerate() {
        if !b.is_within(input, input) {
            return Err(Error::BoxOutOfBounds(format!("#{i} {b}")));
        }
        let (gx, gy) = (b.cx / stride, b.cy / stride);
        let (px, py) = (floor(gx), floor(gy));
        let (cx, cy) = (px as usize, py as usize);
        let sigma = gaussian_sigma(b.w, b.h, cfg.stride);
        let denom = 2.0 * sigma * sigma;

        let hm = maps.hm.as_mut_slice();
        for y in 0..res {
            let dy = y as f64 - py;
            for x in 0..res {
                let dx = x as f64 - px;
                let v = exp(-(dx * dx + dy * dy) / denom);
                let cell = &mut hm[y * res + x];
                if v > *cell {
                    *cell = v;
                }
            }
        }

        if let Some(prev) = owner[cy * res + cx].replace(i) {
            log::warn!("boxes #{prev} and #{i} share peak cell ({cx}, {cy}); keeping #{i}");
        }
        maps.wh.set(cx, cy, 0, b.w);
        maps.wh.set(cx, cy, 1, b.h);
        maps.offset.set(cx, cy, 0, gx - px);
        maps.offset.set(cx, cy, 1, gy - py);
    }
    Ok(maps)
}

/// Number of boxes that land on a peak cell already claimed by an earlier
/// box (and so lose their size/offset to the later box).
pub fn peak_collisions(boxes: &[ChangeBox], cfg: &CodecConfig) -> usize {
    let stride = cfg.stride as f64;
    let mut seen: Vec<(i64, i64)> = Vec::with_capacity(boxes.len());
    let mut collisions = 0;
    for b in boxes {
        let cell = (floor(b.cx / stride) as i64, floor(b.cy / stride) as i64);
        if seen.contains(&cell) {
            collisions += 1;
        } else {
            seen.push(cell);
        }
    }
    collisions
}

/// Turns prediction maps into detections.
///
/// A cell is a candidate when its heatmap value exceeds the threshold and is
/// no smaller than any of its (up to 8) neighbors. Candidates are ordered by
/// score, ties by row-major cell index, and truncated to `max_detections`.
pub fn decode_maps(maps: &TargetMaps, cfg: &CodecConfig) -> Result<Vec<Detection>> {
    cfg.validate()?;
    maps.validate(cfg.map_resolution)?;
    let res = cfg.map_resolution;
    let stride = cfg.stride as f64;
    let hm = maps.hm.as_slice();

    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for y in 0..res {
        for x in 0..res {
            let v = hm[y * res + x];
            if v.is_nan() || v <= cfg.peak_threshold {
                continue;
            }
            let is_max = (y.saturating_sub(1)..=(y + 1).min(res - 1)).all(|ny| {
                (x.saturating_sub(1)..=(x + 1).min(res - 1))
                    .all(|nx| (nx == x && ny == y) || hm[ny * res + nx] <= v)
            });
            if is_max {
                candidates.push((v, y * res + x));
            }
        }
    }
    // stable sort keeps row-major order among equal scores
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    candidates.truncate(cfg.max_detections);

    Ok(candidates
        .into_iter()
        .map(|(score, idx)| {
            let (x, y) = (idx % res, idx / res);
            let cx = (x as f64 + maps.offset.get(x, y, 0)) * stride;
            let cy = (y as f64 + maps.offset.get(x, y, 1)) * stride;
            Detection {
                bbox: ChangeBox::new(cx, cy, maps.wh.get(x, y, 0), maps.wh.get(x, y, 1)),
                score: score.clamp(0.0, 1.0),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> CodecConfig {
        CodecConfig::default()
    }

    // IoU of a w x h box against itself shifted by (r, r)
    fn shifted_iou(w: f64, h: f64, r: f64) -> f64 {
        let inter = (w - r).max(0.0) * (h - r).max(0.0);
        inter / (2.0 * w * h - inter)
    }

    #[test]
    fn radius_matches_bisection_search() {
        for &(w, h) in &[(1.0f64, 1.0f64), (30.0, 30.0), (5.0, 40.0), (100.0, 12.5), (128.0, 128.0)] {
            let (mut lo, mut hi) = (0.0f64, w.min(h));
            for _ in 0..200 {
                let mid = (lo + hi) / 2.0;
                if shifted_iou(w, h, mid) >= RADIUS_MIN_IOU {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!((gaussian_radius(w, h) - lo).abs() < 1e-9, "{w}x{h}");
        }
    }

    #[test]
    fn tiny_box_sigma_hits_the_floor() {
        assert_eq!(gaussian_sigma(4.0, 4.0, 4), 1.0);
    }

    #[test]
    fn sigma_for_a_120_pixel_square() {
        // 30x30 cells: r = (60 - sqrt(3600 - 3600 * 3/17)) / 2 ~ 2.7754,
        // r / 3 < 1 so the floor applies
        let r = gaussian_radius(30.0, 30.0);
        assert!((r - 2.775_443_611).abs() < 1e-6);
        assert_eq!(gaussian_sigma(120.0, 120.0, 4), 1.0);
        // a box big enough to clear the floor
        let s = gaussian_sigma(480.0, 480.0, 4);
        assert!((s - gaussian_radius(120.0, 120.0) / 3.0).abs() < 1e-12 && s > 1.0);
    }

    #[test]
    fn exact_stride_multiple_has_zero_offset() {
        let maps = encode_targets(&[ChangeBox::new(100.0, 60.0, 20.0, 10.0)], &cfg()).unwrap();
        assert_eq!(maps.hm.get(25, 15, 0), 1.0);
        assert_eq!(maps.offset.get(25, 15, 0), 0.0);
        assert_eq!(maps.offset.get(25, 15, 1), 0.0);
        assert_eq!(maps.peak_cells(), vec![(25, 15)]);
    }

    #[test]
    fn fractional_center_offset() {
        let maps = encode_targets(&[ChangeBox::new(101.0, 62.0, 20.0, 10.0)], &cfg()).unwrap();
        assert_eq!(maps.peak_cells(), vec![(25, 15)]);
        assert_eq!(maps.offset.get(25, 15, 0), 0.25);
        assert_eq!(maps.offset.get(25, 15, 1), 0.5);
        assert_eq!(maps.wh.get(25, 15, 0), 20.0);
        assert_eq!(maps.wh.get(25, 15, 1), 10.0);
    }

    #[test]
    fn neighbor_value_with_unit_sigma() {
        let maps = encode_targets(&[ChangeBox::new(100.0, 60.0, 8.0, 8.0)], &cfg()).unwrap();
        assert!((maps.hm.get(26, 15, 0) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((maps.hm.get(26, 15, 0) - 0.6065).abs() < 1e-4);
    }

    #[test]
    fn empty_input_gives_empty_maps() {
        let maps = encode_targets(&[], &cfg()).unwrap();
        assert!(maps.hm.as_slice().iter().all(|&v| v == 0.0));
        assert!(decode_maps(&maps, &cfg()).unwrap().is_empty());
    }

    #[test]
    fn out_of_bounds_box_is_rejected() {
        let err = encode_targets(&[ChangeBox::new(510.0, 20.0, 10.0, 10.0)], &cfg()).unwrap_err();
        assert!(matches!(err, Error::BoxOutOfBounds(_)));
    }

    #[test]
    fn single_box_roundtrip() {
        let b = ChangeBox::new(233.7, 101.25, 57.5, 31.0);
        let dets = decode_maps(&encode_targets(&[b], &cfg()).unwrap(), &cfg()).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].score, 1.0);
        assert!((dets[0].bbox.cx - b.cx).abs() < 1e-9);
        assert!((dets[0].bbox.cy - b.cy).abs() < 1e-9);
        assert_eq!((dets[0].bbox.w, dets[0].bbox.h), (b.w, b.h));
    }

    #[test]
    fn colliding_peaks_keep_the_later_box() {
        let a = ChangeBox::new(100.5, 100.5, 10.0, 10.0);
        let b = ChangeBox::new(101.5, 102.5, 30.0, 20.0);
        assert_eq!(peak_collisions(&[a, b], &cfg()), 1);
        let maps = encode_targets(&[a, b], &cfg()).unwrap();
        assert_eq!(maps.wh.get(25, 25, 0), 30.0);
        assert_eq!(decode_maps(&maps, &cfg()).unwrap().len(), 1);
    }

    #[test]
    fn plateau_ties_break_row_major() {
        let mut maps = TargetMaps::zeros(128);
        maps.hm.set(10, 4, 0, 0.8);
        maps.hm.set(3, 9, 0, 0.8);
        maps.hm.set(50, 50, 0, 0.9);
        let dets = decode_maps(&maps, &cfg()).unwrap();
        let centers: Vec<(f64, f64)> = dets.iter().map(|d| (d.bbox.cx, d.bbox.cy)).collect();
        assert_eq!(centers, vec![(200.0, 200.0), (40.0, 16.0), (12.0, 36.0)]);
    }

    #[test]
    fn threshold_is_strict_and_max_detections_truncates() {
        let mut maps = TargetMaps::zeros(128);
        for i in 0..10 {
            maps.hm.set(i * 3, 0, 0, 0.5 + i as f64 * 0.01);
        }
        maps.hm.set(100, 100, 0, 0.3);
        let mut c = cfg();
        assert_eq!(decode_maps(&maps, &c).unwrap().len(), 10);
        c.max_detections = 4;
        let dets = decode_maps(&maps, &c).unwrap();
        assert_eq!(dets.len(), 4);
        assert!((dets[0].score - 0.59).abs() < 1e-12);
    }

    #[test]
    fn wrong_map_size_is_rejected() {
        let maps = TargetMaps::zeros(64);
        assert!(matches!(decode_maps(&maps, &cfg()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn inconsistent_config_is_rejected() {
        let c = CodecConfig {
            input_resolution: 500,
            ..CodecConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
