//! Change geometry samplers: anchor-box rectangles and irregular polygons.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;

use crate::error::{invalid, Error, Result};
use crate::image::{Rect, SoftMask};
use crate::math::{ceil, floor, hypot, sincos, sqrt};

/// One aspect ratio, `width:height` before the optional orientation swap.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RatioWeight {
    pub ratio: [u32; 2],
    pub weight: f64,
}

/// Half-open range of box area as a fraction of the image area.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AreaBin {
    pub min: f64,
    pub max: f64,
    pub weight: f64,
}

/// Size distribution for anchor-box sampled changes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnchorSpec {
    pub aspect_ratios: Vec<RatioWeight>,
    pub swap_probability: f64,
    pub area_bins: Vec<AreaBin>,
}

impl Default for AnchorSpec {
    /// Ratios 1:1, 1:2, 1:3, 1:5, 1:7 weighted 3:3:3:2:2; small, medium
    /// and large area bins weighted 4:2:1.
    fn default() -> Self {
        let r = |k, weight| RatioWeight {
            ratio: [1, k],
            weight,
        };
        let bin = |min, max, weight| AreaBin { min, max, weight };
        Self {
            aspect_ratios: vec![r(1, 3.0), r(2, 3.0), r(3, 3.0), r(5, 2.0), r(7, 2.0)],
            swap_probability: 0.5,
            area_bins: vec![bin(0.005, 0.05, 4.0), bin(0.05, 0.25, 2.0), bin(0.25, 0.5, 1.0)],
        }
    }
}

impl AnchorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.aspect_ratios.is_empty() || self.area_bins.is_empty() {
            return Err(invalid("anchor", "needs at least one ratio and one area bin"));
        }
        for r in &self.aspect_ratios {
            if r.ratio[0] == 0 || r.ratio[1] == 0 {
                return Err(invalid("aspect_ratios", "ratio terms must be positive"));
            }
            if !(r.weight > 0.0 && r.weight.is_finite()) {
                return Err(invalid("aspect_ratios", "weights must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.swap_probability) {
            return Err(invalid("swap_probability", "must lie in [0, 1]"));
        }
        let mut prev_max = 0.0;
        for b in &self.area_bins {
            if !(b.weight > 0.0 && b.weight.is_finite()) {
                return Err(invalid("area_bins", "weights must be positive"));
            }
            if !(b.min > 0.0 && b.min < b.max && b.max <= 1.0) {
                return Err(invalid("area_bins", "each bin needs 0 < min < max <= 1"));
            }
            if b.min < prev_max {
                return Err(invalid("area_bins", "bins must be ordered and disjoint"));
            }
            prev_max = b.max;
        }
        Ok(())
    }
}

/// Which ratio and bin a sample came from, and the resulting rect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnchorSample {
    pub rect: Rect,
    pub ratio_index: usize,
    pub bin_index: usize,
    pub swapped: bool,
}

/// Sampler over (ratio, area bin) cells for one image size.
///
/// Some cells cannot be realized inside the image (a 1:7 box cannot cover a
/// quarter of a square image). Those cells get zero mass and the remaining
/// cells are rebalanced by iterative proportional fitting, so the marginal
/// ratio and bin frequencies still follow the configured weights whenever
/// such a joint distribution exists.
#[derive(Debug, Clone)]
pub struct AnchorSampler {
    width: u32,
    height: u32,
    spec: AnchorSpec,
    // per cell: inclusive range of the integer scale t (dims = ratio * t)
    scales: Vec<Option<(u32, u32)>>,
    joint: Vec<f64>,
    cells: WeightedIndex<f64>,
}

impl AnchorSampler {
    pub fn new(width: u32, height: u32, spec: &AnchorSpec) -> Result<Self> {
        spec.validate()?;
        let (nr, nb) = (spec.aspect_ratios.len(), spec.area_bins.len());
        let mut scales = Vec::with_capacity(nr * nb);
        for r in &spec.aspect_ratios {
            for b in &spec.area_bins {
                scales.push(scale_range(width, height, r.ratio, b));
            }
        }
        if scales.iter().all(Option::is_none) {
            return Err(Error::ImageTooSmall { width, height });
        }
        let ratio_w: Vec<f64> = spec.aspect_ratios.iter().map(|r| r.weight).collect();
        let bin_w: Vec<f64> = spec.area_bins.iter().map(|b| b.weight).collect();
        let feasible: Vec<bool> = scales.iter().map(Option::is_some).collect();
        let joint = fit_joint(&ratio_w, &bin_w, &feasible);
        let cells = WeightedIndex::new(joint.iter().copied())
            .map_err(|_| Error::ImageTooSmall { width, height })?;
        Ok(Self {
            width,
            height,
            spec: spec.clone(),
            scales,
            joint,
            cells,
        })
    }

    /// Joint probability of each (ratio, bin) cell, ratio-major.
    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AnchorSample {
        let cell = self.cells.sample(rng);
        let nb = self.spec.area_bins.len();
        let (ratio_index, bin_index) = (cell / nb, cell % nb);
        let swapped = rng.random_bool(self.spec.swap_probability);
        let rect = self
            .sample_cell(ratio_index, bin_index, swapped, rng)
            .expect("cells with zero mass are never drawn");
        AnchorSample {
            rect,
            ratio_index,
            bin_index,
            swapped,
        }
    }

    /// Samples a rect from one specific (ratio, bin) cell.
    pub fn sample_cell<R: Rng + ?Sized>(
        &self,
        ratio_index: usize,
        bin_index: usize,
        swapped: bool,
        rng: &mut R,
    ) -> Result<Rect> {
        let nb = self.spec.area_bins.len();
        if ratio_index >= self.spec.aspect_ratios.len() || bin_index >= nb {
            return Err(invalid("cell", "ratio or bin index out of range"));
        }
        let (t_min, t_max) = self.scales[ratio_index * nb + bin_index].ok_or(Error::ImageTooSmall {
            width: self.width,
            height: self.height,
        })?;
        let [a, b] = self.spec.aspect_ratios[ratio_index].ratio;
        let unit = a as f64 * b as f64;
        // area-uniform draw mapped onto the integer scale grid
        let lo = unit * (t_min as f64) * (t_min as f64);
        let hi = unit * ((t_max + 1) as f64) * ((t_max + 1) as f64);
        let area = rng.random_range(lo..hi);
        let t = (floor(sqrt(area / unit)) as u32).clamp(t_min, t_max);
        let (w, h) = if swapped { (b * t, a * t) } else { (a * t, b * t) };
        let x = rng.random_range(0..=self.width - w);
        let y = rng.random_range(0..=self.height - h);
        Ok(Rect::new(x, y, w, h))
    }
}

/// Draws one anchor-box rect fully inside a `width`×`height` image.
pub fn sample_anchor_rect<R: Rng + ?Sized>(
    width: u32,
    height: u32,
    spec: &AnchorSpec,
    rng: &mut R,
) -> Result<Rect> {
    Ok(AnchorSampler::new(width, height, spec)?.sample(rng).rect)
}

/// Area fraction of a `w`×`h` rect in a `width`×`height` image.
#[inline]
pub fn area_fraction(w: u32, h: u32, width: u32, height: u32) -> f64 {
    (w as f64 * h as f64) / (width as f64 * height as f64)
}

// Integer scales t for which the ratio's box (in both orientations) fits the
// image and its area fraction falls inside the bin.
fn scale_range(width: u32, height: u32, ratio: [u32; 2], bin: &AreaBin) -> Option<(u32, u32)> {
    let [a, b] = ratio;
    let t_fit = width.min(height) / a.max(b);
    let frac = |t: u32| area_fraction(a * t, b * t, width, height);
    let mut t_min = (floor(sqrt(bin.min * width as f64 * height as f64 / (a as f64 * b as f64))) as u32).max(1);
    while t_min > 1 && frac(t_min - 1) >= bin.min {
        t_min -= 1;
    }
    while t_min <= t_fit && frac(t_min) < bin.min {
        t_min += 1;
    }
    let mut t_max = t_min;
    while t_max < t_fit && frac(t_max + 1) < bin.max {
        t_max += 1;
    }
    (t_min <= t_fit && frac(t_min) >= bin.min && frac(t_max) < bin.max).then_some((t_min, t_max))
}

// Iterative proportional fitting of the outer product of the two weight
// vectors onto their marginals, with infeasible cells pinned at zero.
// Marginals whose row or column has no feasible cell are dropped.
fn fit_joint(row_w: &[f64], col_w: &[f64], feasible: &[bool]) -> Vec<f64> {
    let (nr, nc) = (row_w.len(), col_w.len());
    let live_row: Vec<bool> = (0..nr).map(|i| (0..nc).any(|j| feasible[i * nc + j])).collect();
    let live_col: Vec<bool> = (0..nc).map(|j| (0..nr).any(|i| feasible[i * nc + j])).collect();
    let normalize = |w: &[f64], live: &[bool]| {
        let total: f64 = w.iter().zip(live).filter(|(_, l)| **l).map(|(v, _)| v).sum();
        w.iter()
            .zip(live)
            .map(|(v, l)| if *l { v / total } else { 0.0 })
            .collect::<Vec<_>>()
    };
    let row_target = normalize(row_w, &live_row);
    let col_target = normalize(col_w, &live_col);

    let mut p: Vec<f64> = (0..nr * nc)
        .map(|k| if feasible[k] { row_target[k / nc] * col_target[k % nc] } else { 0.0 })
        .collect();
    for _ in 0..10_000 {
        for i in 0..nr {
            let s: f64 = p[i * nc..(i + 1) * nc].iter().sum();
            if s > 0.0 {
                p[i * nc..(i + 1) * nc].iter_mut().for_each(|v| *v *= row_target[i] / s);
            }
        }
        let mut worst: f64 = 0.0;
        for j in 0..nc {
            let s: f64 = (0..nr).map(|i| p[i * nc + j]).sum();
            if s > 0.0 {
                (0..nr).for_each(|i| p[i * nc + j] *= col_target[j] / s);
            }
        }
        for i in 0..nr {
            let s: f64 = p[i * nc..(i + 1) * nc].iter().sum();
            worst = worst.max((s - row_target[i]).abs());
        }
        if worst < 1e-13 {
            break;
        }
    }
    p
}

/// Parameters of the irregular polygon generator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolygonSpec {
    pub n: usize,
    pub irregularity: f64,
    pub spikiness: f64,
    pub avg_radius: f64,
    pub center: (f64, f64),
}

impl PolygonSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(invalid("n", "a polygon needs at least 3 vertices"));
        }
        if !(0.0..=1.0).contains(&self.irregularity) {
            return Err(invalid("irregularity", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.spikiness) {
            return Err(invalid("spikiness", "must lie in [0, 1]"));
        }
        if !(self.avg_radius > 0.0 && self.avg_radius.is_finite()) {
            return Err(invalid("avg_radius", "must be positive"));
        }
        Ok(())
    }
}

/// Closed polygon; the last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<(f64, f64)>,
}

impl Polygon {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(invalid("vertices", "a polygon needs at least 3 vertices"));
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            vertices: vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)],
        }
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Signed shoelace area (positive for counterclockwise in y-up axes).
    pub fn signed_area(&self) -> f64 {
        self.edges().map(|((x0, y0), (x1, y1))| x0 * y1 - x1 * y0).sum::<f64>() / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|((x0, y0), (x1, y1))| hypot(x1 - x0, y1 - y0)).sum()
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(x, y)| (a.min(x), b.min(y), c.max(x), d.max(y)),
        )
    }

    /// Applies `f` to every vertex.
    pub fn map(&self, f: impl Fn((f64, f64)) -> (f64, f64)) -> Self {
        Self {
            vertices: self.vertices.iter().copied().map(f).collect(),
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        self.map(|(x, y)| (x + dx, y + dy))
    }
}

/// Walks once around a circle of `avg_radius`, placing one vertex per random
/// angular step at a random radius.
///
/// Steps are `2π/n` perturbed uniformly by up to `±irregularity·2π/n` and
/// rescaled to sum to exactly one turn. Radii are Gaussian around
/// `avg_radius` with standard deviation `spikiness·avg_radius`, clipped to
/// `(0, 2·avg_radius]`.
pub fn gen_irregular_polygon<R: Rng + ?Sized>(spec: &PolygonSpec, rng: &mut R) -> Result<Polygon> {
    spec.validate()?;
    let n = spec.n;
    let mean_step = TAU / n as f64;
    let jitter = spec.irregularity * mean_step;
    let mut steps: Vec<f64> = (0..n)
        .map(|_| {
            if jitter > 0.0 {
                mean_step + rng.random_range(-jitter..=jitter)
            } else {
                mean_step
            }
        })
        .collect();
    let total: f64 = steps.iter().sum();
    steps.iter_mut().for_each(|s| *s *= TAU / total);

    let radius = Normal::new(spec.avg_radius, spec.spikiness * spec.avg_radius)
        .map_err(|_| invalid("spikiness", "invalid radius distribution"))?;
    let max_r = 2.0 * spec.avg_radius;
    let min_r = spec.avg_radius * 1e-6;
    let (cx, cy) = spec.center;
    let mut angle = rng.random_range(0.0..TAU);
    let mut vertices = Vec::with_capacity(n);
    for step in steps {
        let r = if spec.spikiness > 0.0 {
            radius.sample(rng).clamp(min_r, max_r)
        } else {
            spec.avg_radius
        };
        let (s, c) = sincos(angle);
        vertices.push((cx + r * c, cy + r * s));
        angle += step;
    }
    Polygon::new(vertices)
}

/// Rasterizes `poly` (given in image coordinates) into a mask covering
/// `bounds`. A pixel is inside when its center passes the even-odd
/// crossing test.
pub fn rasterize_polygon(poly: &Polygon, bounds: Rect) -> Result<SoftMask> {
    if poly.area() < 1e-12 {
        return Err(Error::DegeneratePolygon);
    }
    if bounds.w == 0 || bounds.h == 0 {
        return Err(invalid("bounds", "empty raster region"));
    }
    let (w, h) = (bounds.w as usize, bounds.h as usize);
    let mut alpha = vec![0.0f32; w * h];
    let mut crossings: Vec<f64> = Vec::new();
    for row in 0..h {
        let yc = bounds.y as f64 + row as f64 + 0.5;
        crossings.clear();
        for ((x0, y0), (x1, y1)) in poly.edges() {
            if (y0 <= yc) != (y1 <= yc) {
                crossings.push(x0 + (yc - y0) / (y1 - y0) * (x1 - x0));
            }
        }
        crossings.sort_by(|a, b| a.total_cmp(b));
        for span in crossings.chunks_exact(2) {
            // centers xc with span[0] <= xc < span[1] lie inside
            let first = ceil(span[0] - bounds.x as f64 - 0.5).max(0.0);
            let last = (ceil(span[1] - bounds.x as f64 - 0.5) - 1.0).min(w as f64 - 1.0);
            if last < first {
                continue;
            }
            for col in first as usize..=last as usize {
                alpha[row * w + col] = 1.0;
            }
        }
    }
    SoftMask::from_raw(bounds.w, bounds.h, alpha)
}
