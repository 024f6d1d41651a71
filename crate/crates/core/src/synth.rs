//! Assembles one synthetic reference/test pair.
//!
//! The reference is a background image; the test image is the same
//! background with one to five pasted changes. Each change is a rectangle
//! crop, an irregular polygon crop, or a pre-cut instance, optionally rotated
//! and edge-feathered. Noise and color jitter, when enabled, disturb one
//! randomly chosen side of the pair.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boxes::ChangeBox;
use crate::error::{invalid, Error, Result};
use crate::image::{Patch, Rect, RgbImage};
use crate::imageops::{
    add_gaussian_noise, color_jitter, composite, crop_rect, feather_mask, feather_radius, pad_patch,
    resize_patch, rotate_patch,
};
use crate::math::{ceil, floor, round, sincos, sqrt};
use crate::shapes::{
    area_fraction, gen_irregular_polygon, rasterize_polygon, AnchorSampler, AnchorSpec, Polygon, PolygonSpec,
};

/// Most changes pasted into one pair.
pub const MAX_CHANGES: usize = 5;

/// Attempts per change before the pair fails.
pub const PLACEMENT_RETRIES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    RegularCrop,
    InstanceCutout,
    IrregularCrop,
}

impl ChangeKind {
    pub const ALL: [ChangeKind; 3] = [ChangeKind::RegularCrop, ChangeKind::InstanceCutout, ChangeKind::IrregularCrop];

    /// Whether the change is sized by the anchor sampler.
    pub fn anchor_sized(self) -> bool {
        !matches!(self, ChangeKind::InstanceCutout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KindWeight {
    pub kind: ChangeKind,
    pub weight: f64,
}

fn default_blur_sigma() -> [f64; 2] {
    [0.8, 1.1]
}

fn default_noise_sigma() -> [f64; 2] {
    [2.0, 10.0]
}

fn default_jitter_gain() -> [f64; 2] {
    [0.9, 1.1]
}

/// Which disturbances are applied, and the ranges their strengths are drawn
/// from (uniformly).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Restrictions {
    pub rotation: bool,
    pub margin_blur: bool,
    #[serde(default = "default_blur_sigma")]
    pub blur_sigma: [f64; 2],
    pub noise: bool,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: [f64; 2],
    pub jitter: bool,
    #[serde(default = "default_jitter_gain")]
    pub jitter_gain: [f64; 2],
}

impl Default for Restrictions {
    fn default() -> Self {
        Self {
            rotation: true,
            margin_blur: true,
            blur_sigma: default_blur_sigma(),
            noise: true,
            noise_sigma: default_noise_sigma(),
            jitter: true,
            jitter_gain: default_jitter_gain(),
        }
    }
}

impl Restrictions {
    pub fn none() -> Self {
        Self {
            rotation: false,
            margin_blur: false,
            noise: false,
            jitter: false,
            ..Self::default()
        }
    }
}

/// Ranges the per-change polygon parameters are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolygonDefaults {
    pub n: usize,
    pub irregularity: [f64; 2],
    pub spikiness: [f64; 2],
}

impl Default for PolygonDefaults {
    fn default() -> Self {
        Self {
            n: 10,
            irregularity: [0.4, 0.7],
            spikiness: [0.0, 0.15],
        }
    }
}

fn default_image_size() -> [u32; 2] {
    [512, 512]
}

/// Full recipe for one generation strategy.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GenerationConfig {
    /// Tag copied into every record, e.g. `exp7`.
    pub strategy: String,
    pub change_kinds: Vec<KindWeight>,
    pub restrictions: Restrictions,
    #[serde(default)]
    pub anchor: AnchorSpec,
    #[serde(default)]
    pub polygon: PolygonDefaults,
    pub count: usize,
    pub seed: u64,
    /// Backgrounds are resized to this `[width, height]` when loaded.
    #[serde(default = "default_image_size")]
    pub image_size: [u32; 2],
    pub source_pool_dir: String,
    #[serde(default)]
    pub instance_pool_dir: Option<String>,
}

fn check_range(name: &'static str, r: [f64; 2], lo: f64, hi: f64) -> Result<()> {
    if !(r[0] >= lo && r[0] <= r[1] && r[1] <= hi) {
        return Err(invalid(name, format!("[{}, {}] must be ordered within [{lo}, {hi}]", r[0], r[1])));
    }
    Ok(())
}

impl GenerationConfig {
    /// Table of the eight synthetic strategies. `exp` is 1..=8.
    ///
    /// | exp | changes |
    /// |-----|---------|
    /// | 1 | regular crops, margin blur, no rotation |
    /// | 2 | instances |
    /// | 3 | regular crops |
    /// | 4 | irregular crops |
    /// | 5 | instances + regular, 1:1 |
    /// | 6 | instances + irregular, 1:1 |
    /// | 7 | regular + irregular, 1:1 |
    /// | 8 | all three, 1:1:1 |
    ///
    /// Rotation (except exp 1), margin blur, noise and jitter are on.
    pub fn preset(exp: u8, source_pool_dir: &str, instance_pool_dir: Option<&str>) -> Result<Self> {
        use ChangeKind::*;
        let kinds: &[ChangeKind] = match exp {
            1 | 3 => &[RegularCrop],
            2 => &[InstanceCutout],
            4 => &[IrregularCrop],
            5 => &[InstanceCutout, RegularCrop],
            6 => &[InstanceCutout, IrregularCrop],
            7 => &[RegularCrop, IrregularCrop],
            8 => &[InstanceCutout, RegularCrop, IrregularCrop],
            _ => return Err(invalid("exp", format!("no preset {exp}; expected 1..=8"))),
        };
        let weight = 1.0 / kinds.len() as f64;
        let needs_instances = kinds.contains(&InstanceCutout);
        Ok(Self {
            strategy: format!("exp{exp}"),
            change_kinds: kinds.iter().map(|&kind| KindWeight { kind, weight }).collect(),
            restrictions: Restrictions {
                rotation: exp != 1,
                ..Restrictions::default()
            },
            anchor: AnchorSpec::default(),
            polygon: PolygonDefaults::default(),
            count: 4780,
            seed: 0,
            image_size: default_image_size(),
            source_pool_dir: source_pool_dir.into(),
            instance_pool_dir: if needs_instances { instance_pool_dir.map(Into::into) } else { None },
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(invalid("count", "must be at least 1"));
        }
        if self.change_kinds.is_empty() {
            return Err(invalid("change_kinds", "empty mix"));
        }
        if self.change_kinds.iter().any(|k| !(k.weight >= 0.0 && k.weight.is_finite())) {
            return Err(invalid("change_kinds", "weights must be finite and >= 0"));
        }
        let total: f64 = self.change_kinds.iter().map(|k| k.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("change_kinds", format!("weights sum to {total}, expected 1")));
        }
        if self.image_size[0] == 0 || self.image_size[1] == 0 {
            return Err(invalid("image_size", "must be positive"));
        }
        let r = &self.restrictions;
        check_range("blur_sigma", r.blur_sigma, 0.0, 50.0)?;
        check_range("noise_sigma", r.noise_sigma, 0.0, 255.0)?;
        check_range("jitter_gain", r.jitter_gain, 0.5, 1.5)?;
        check_range("irregularity", self.polygon.irregularity, 0.0, 1.0)?;
        check_range("spikiness", self.polygon.spikiness, 0.0, 1.0)?;
        if self.polygon.n < 3 {
            return Err(invalid("polygon.n", "must be at least 3"));
        }
        self.anchor.validate()
    }

    pub fn uses(&self, kind: ChangeKind) -> bool {
        self.change_kinds.iter().any(|k| k.kind == kind && k.weight > 0.0)
    }

    /// Fraction range every anchor-sized box must fall in.
    fn anchor_fraction_range(&self) -> (f64, f64) {
        let lo = self.anchor.area_bins.iter().map(|b| b.min).fold(f64::INFINITY, f64::min);
        let hi = self.anchor.area_bins.iter().map(|b| b.max).fold(0.0, f64::max);
        (lo, hi)
    }
}

/// Images a generator draws from. Backgrounds double as the crop source.
#[derive(Debug, Clone, Copy)]
pub struct Pools<'a> {
    pub backgrounds: &'a [RgbImage],
    pub instances: &'a [Patch],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Reference,
    Test,
}

/// One change as pasted into the test image.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PastedChange {
    pub kind: ChangeKind,
    pub bbox: ChangeBox,
    pub rect: Rect,
    pub angle: f64,
    pub blur_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub background_index: usize,
    pub reference: RgbImage,
    pub test: RgbImage,
    pub changes: Vec<PastedChange>,
    pub disturbed: Option<Side>,
}

impl SyntheticPair {
    pub fn boxes(&self) -> Vec<ChangeBox> {
        self.changes.iter().map(|c| c.bbox).collect()
    }
}

/// Generator for pair `pair_index`, attempt `attempt`, of a run seeded with
/// `seed`. Each pair reads its own ChaCha stream; attempts start at disjoint
/// word positions within it. The result does not depend on which thread
/// produces the pair or in what order.
pub fn pair_rng(seed: u64, pair_index: u64, attempt: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair_index);
    rng.set_word_pos((attempt as u128) << 48);
    rng
}

/// Builds one pair from the pools.
pub fn generate_pair<R: Rng + ?Sized>(cfg: &GenerationConfig, pools: Pools<'_>, rng: &mut R) -> Result<SyntheticPair> {
    cfg.validate()?;
    if pools.backgrounds.is_empty() {
        return Err(Error::Generation("background pool is empty".into()));
    }
    if cfg.uses(ChangeKind::InstanceCutout) && pools.instances.is_empty() {
        return Err(Error::Generation("instance pool is empty but instance changes are weighted".into()));
    }
    let kinds = WeightedIndex::new(cfg.change_kinds.iter().map(|k| k.weight))
        .map_err(|e| invalid("change_kinds", format!("{e}")))?;

    let background_index = rng.random_range(0..pools.backgrounds.len());
    let reference = pools.backgrounds[background_index].clone();
    let (width, height) = (reference.width(), reference.height());
    let sampler = if cfg.change_kinds.iter().any(|k| k.kind.anchor_sized() && k.weight > 0.0) {
        Some(AnchorSampler::new(width, height, &cfg.anchor)?)
    } else {
        None
    };

    let mut test = reference.clone();
    let n_changes = rng.random_range(1..=MAX_CHANGES);
    let mut changes = Vec::with_capacity(n_changes);
    for i in 0..n_changes {
        let kind = cfg.change_kinds[kinds.sample(rng)].kind;
        let mut pasted = None;
        for _ in 0..PLACEMENT_RETRIES {
            if let Some(done) = try_paste(kind, cfg, pools, sampler.as_ref(), &test, rng)? {
                pasted = Some(done);
                break;
            }
        }
        let (image, change) = pasted.ok_or_else(|| {
            Error::Generation(format!("change #{i} ({kind:?}) could not be placed in {PLACEMENT_RETRIES} attempts"))
        })?;
        test = image;
        changes.push(change);
    }

    let mut pair = SyntheticPair {
        background_index,
        reference,
        test,
        changes,
        disturbed: None,
    };
    let r = &cfg.restrictions;
    if r.noise || r.jitter {
        let side = if rng.random_bool(0.5) { Side::Reference } else { Side::Test };
        let target = match side {
            Side::Reference => &mut pair.reference,
            Side::Test => &mut pair.test,
        };
        if r.noise {
            let sigma = uniform(rng, r.noise_sigma);
            *target = add_gaussian_noise(target, sigma, rng.next_u64())?;
        }
        if r.jitter {
            let gains = [uniform(rng, r.jitter_gain), uniform(rng, r.jitter_gain), uniform(rng, r.jitter_gain)];
            *target = color_jitter(target, gains)?;
        }
        pair.disturbed = Some(side);
    }
    Ok(pair)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..range[1])
    }
}

/// One attempt at building and pasting a change. `Ok(None)` means this
/// attempt's random draw did not work out and another may.
fn try_paste<R: Rng + ?Sized>(
    kind: ChangeKind,
    cfg: &GenerationConfig,
    pools: Pools<'_>,
    sampler: Option<&AnchorSampler>,
    canvas: &RgbImage,
    rng: &mut R,
) -> Result<Option<(RgbImage, PastedChange)>> {
    let (width, height) = (canvas.width(), canvas.height());
    let r = &cfg.restrictions;
    let angle = if r.rotation { rng.random_range(0.0..360.0) } else { 0.0 };
    let blur_sigma = if r.margin_blur { uniform(rng, r.blur_sigma) } else { 0.0 };
    let margin = if blur_sigma > 0.0 { feather_radius(blur_sigma) } else { 0 };

    let shaped = match kind {
        ChangeKind::RegularCrop => {
            let sampler = sampler.expect("anchor sampler exists when crops are weighted");
            regular_crop(sampler, pools.backgrounds, angle, margin, rng)?
        }
        ChangeKind::IrregularCrop => {
            let sampler = sampler.expect("anchor sampler exists when crops are weighted");
            irregular_crop(sampler, &cfg.polygon, pools.backgrounds, angle, margin, rng)?
        }
        ChangeKind::InstanceCutout => {
            let cutout = &pools.instances[rng.random_range(0..pools.instances.len())];
            instance_cutout(cutout, width, height, angle, margin)?
        }
    };
    let Some(shaped) = shaped else {
        return Ok(None);
    };
    let patch = feather_mask(shaped.mask(), blur_sigma)
        .and_then(|m| Patch::new(shaped.image().clone(), m))?;

    let Some(support) = patch.mask().support_bounds() else {
        return Ok(None);
    };
    if support.w > width || support.h > height {
        return Ok(None);
    }
    if kind.anchor_sized() {
        let (lo, hi) = cfg.anchor_fraction_range();
        let frac = area_fraction(support.w, support.h, width, height);
        if !(frac >= lo && frac < hi) {
            return Ok(None);
        }
    }
    let x = rng.random_range(0..=width - support.w) as i64 - support.x as i64;
    let y = rng.random_range(0..=height - support.h) as i64 - support.y as i64;
    let (image, rect) = composite(canvas, &patch, (x, y))?;
    Ok(Some((
        image,
        PastedChange {
            kind,
            bbox: ChangeBox::from(rect),
            rect,
            angle,
            blur_sigma,
        },
    )))
}

/// Scale `k` such that a shape whose rotated extent is `a`×`b` at unit scale,
/// grown by `margin` on every side, covers `target_area` pixels.
fn scale_for_area(a: f64, b: f64, margin: u32, target_area: f64) -> Option<f64> {
    let m2 = 2.0 * margin as f64;
    // (k a + m2)(k b + m2) = target
    let qa = a * b;
    let qb = m2 * (a + b);
    let qc = m2 * m2 - target_area;
    if qa <= 0.0 || qc >= 0.0 {
        return None;
    }
    let disc = qb * qb - 4.0 * qa * qc;
    Some((-qb + sqrt(disc)) / (2.0 * qa))
}

/// Rotated bounding extent of a `w`×`h` rectangle.
fn rotated_extent(w: f64, h: f64, angle_deg: f64) -> (f64, f64) {
    let (s, c) = sincos(angle_deg.to_radians());
    let (s, c) = (s.abs(), c.abs());
    (w * c + h * s, w * s + h * c)
}

fn random_crop<R: Rng + ?Sized>(sources: &[RgbImage], w: u32, h: u32, rng: &mut R) -> Result<Option<Patch>> {
    let src = &sources[rng.random_range(0..sources.len())];
    if w == 0 || h == 0 || w > src.width() || h > src.height() {
        return Ok(None);
    }
    let x = rng.random_range(0..=src.width() - w);
    let y = rng.random_range(0..=src.height() - h);
    crop_rect(src, Rect::new(x, y, w, h)).map(Some)
}

// The anchor sample fixes the crop's aspect ratio and the area of the final
// (rotated, feathered) box.
fn regular_crop<R: Rng + ?Sized>(
    sampler: &AnchorSampler,
    sources: &[RgbImage],
    angle: f64,
    margin: u32,
    rng: &mut R,
) -> Result<Option<Patch>> {
    let anchor = sampler.sample(rng).rect;
    let (w0, h0) = (anchor.w as f64, anchor.h as f64);
    let (a, b) = rotated_extent(w0, h0, angle);
    let Some(k) = scale_for_area(a, b, margin, w0 * h0) else {
        return Ok(None);
    };
    let cw = round(k * w0).max(1.0) as u32;
    let ch = round(k * h0).max(1.0) as u32;
    let Some(crop) = random_crop(sources, cw, ch, rng)? else {
        return Ok(None);
    };
    Ok(Some(pad_patch(&rotate_patch(&crop, angle), margin)))
}

// A polygon generated on the unit circle is stretched onto the anchor's
// aspect ratio, then scaled like a regular crop.
fn irregular_crop<R: Rng + ?Sized>(
    sampler: &AnchorSampler,
    params: &PolygonDefaults,
    sources: &[RgbImage],
    angle: f64,
    margin: u32,
    rng: &mut R,
) -> Result<Option<Patch>> {
    let anchor = sampler.sample(rng).rect;
    let (w0, h0) = (anchor.w as f64, anchor.h as f64);
    let spec = PolygonSpec {
        n: params.n,
        irregularity: uniform(rng, params.irregularity),
        spikiness: uniform(rng, params.spikiness),
        avg_radius: 1.0,
        center: (0.0, 0.0),
    };
    let unit = gen_irregular_polygon(&spec, rng)?.map(|(x, y)| (x * w0 / 2.0, y * h0 / 2.0));

    let (s, c) = sincos(angle.to_radians());
    let turned = unit.map(|(x, y)| (c * x + s * y, -s * x + c * y));
    let (x0, y0, x1, y1) = turned.bounds();
    let Some(k) = scale_for_area(x1 - x0, y1 - y0, margin, w0 * h0) else {
        return Ok(None);
    };

    let scaled = unit.map(|(x, y)| (k * x, k * y));
    let (bx0, by0, bx1, by1) = scaled.bounds();
    let (ox, oy) = (floor(bx0), floor(by0));
    let cw = ceil(bx1 - ox).max(1.0) as u32;
    let ch = ceil(by1 - oy).max(1.0) as u32;
    let local: Polygon = scaled.translated(-ox, -oy);
    let Some(crop) = random_crop(sources, cw, ch, rng)? else {
        return Ok(None);
    };
    let mask = match rasterize_polygon(&local, Rect::new(0, 0, cw, ch)) {
        Ok(m) => m,
        Err(Error::DegeneratePolygon) => return Ok(None),
        Err(e) => return Err(e),
    };
    if mask.support_bounds().is_none() {
        return Ok(None);
    }
    let shaped = Patch::new(crop.image().clone(), mask)?;
    Ok(Some(pad_patch(&rotate_patch(&shaped, angle), margin)))
}

// Instances keep their own scale unless the rotated, feathered result would
// not fit the canvas.
fn instance_cutout(cutout: &Patch, width: u32, height: u32, angle: f64, margin: u32) -> Result<Option<Patch>> {
    let Some(support) = cutout.mask().support_bounds() else {
        return Ok(None);
    };
    let (a, b) = rotated_extent(support.w as f64, support.h as f64, angle);
    let room_w = width as f64 - 2.0 * margin as f64 - 2.0;
    let room_h = height as f64 - 2.0 * margin as f64 - 2.0;
    if room_w < 1.0 || room_h < 1.0 {
        return Ok(None);
    }
    let fit = (room_w / a).min(room_h / b);
    let source = if fit < 1.0 {
        let w = floor(cutout.width() as f64 * fit).max(1.0) as u32;
        let h = floor(cutout.height() as f64 * fit).max(1.0) as u32;
        resize_patch(cutout, w, h)?
    } else {
        cutout.clone()
    };
    Ok(Some(pad_patch(&rotate_patch(&source, angle), margin)))
}
