//! Training objective over the three prediction maps, with analytic
//! gradients.
//!
//! * Heatmap: penalty-reduced focal loss. At peak cells (`G = 1`) the term is
//!   `(1 − Y)^α · ln Y`; elsewhere `(1 − G)^β · Y^α · ln(1 − Y)`. The sum is
//!   negated and divided by the number of peaks `N` (at least 1).
//! * Size and offset: L1 over both components, evaluated only at peak cells,
//!   divided by `N`.
//! * Total: `hm + λ_wh · wh + λ_offset · offset`.

use alloc::format;
use alloc::vec::Vec;

use crate::codec::{FeatureMap, TargetMaps};
use crate::error::{invalid, Error, Result};
use crate::math::{fabs, fma, ln, pow};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossConfig {
    pub alpha: f64,
    pub beta: f64,
    pub lambda_wh: f64,
    pub lambda_offset: f64,
    /// Predictions are clamped into `[epsilon, 1 − epsilon]` before logs.
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 4.0,
            lambda_wh: 0.1,
            lambda_offset: 1.0,
            epsilon: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(invalid("alpha/beta", "must be positive"));
        }
        if !(self.lambda_wh >= 0.0 && self.lambda_offset >= 0.0) {
            return Err(invalid("lambda", "weights must be non-negative"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(invalid("epsilon", "must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

/// Loss components for one image pair.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossReport {
    pub l_hm: f64,
    pub l_wh: f64,
    pub l_offset: f64,
    pub total: f64,
    pub n_peaks: usize,
}

impl LossReport {
    /// Weights the three components into a report. Each weighted term is
    /// accumulated with a fused multiply-add, so the total is rounded once
    /// per term.
    pub fn combine(l_hm: f64, l_wh: f64, l_offset: f64, n_peaks: usize, cfg: &LossConfig) -> Self {
        Self {
            l_hm,
            l_wh,
            l_offset,
            total: fma(cfg.lambda_offset, l_offset, fma(cfg.lambda_wh, l_wh, l_hm)),
            n_peaks,
        }
    }
}

fn normalizer(n_peaks: usize) -> f64 {
    n_peaks.max(1) as f64
}

fn check_channels(map: &FeatureMap, channels: usize, what: &str) -> Result<()> {
    if map.channels() != channels {
        return Err(Error::ShapeMismatch(format!(
            "{what} has {} channels, expected {channels}",
            map.channels()
        )));
    }
    Ok(())
}

/// Focal heatmap loss of predictions `pred` against targets `target`.
pub fn heatmap_loss(pred: &FeatureMap, target: &FeatureMap, cfg: &LossConfig) -> Result<f64> {
    pred.check_same_shape(target, "heatmap")?;
    check_channels(pred, 1, "heatmap")?;
    let (lo, hi) = (cfg.epsilon, 1.0 - cfg.epsilon);
    let mut n_peaks = 0usize;
    let mut sum = 0.0;
    for (&y, &g) in pred.as_slice().iter().zip(target.as_slice()) {
        let y = y.clamp(lo, hi);
        if g == 1.0 {
            n_peaks += 1;
            sum += pow(1.0 - y, cfg.alpha) * ln(y);
        } else {
            sum += pow(1.0 - g, cfg.beta) * pow(y, cfg.alpha) * ln(1.0 - y);
        }
    }
    Ok(-sum / normalizer(n_peaks))
}

fn l1_at_peaks(pred: &FeatureMap, target: &FeatureMap, peaks: &[(usize, usize)], what: &str) -> Result<f64> {
    pred.check_same_shape(target, what)?;
    check_channels(pred, 2, what)?;
    if peaks.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for &(x, y) in peaks {
        if x >= pred.width() || y >= pred.height() {
            return Err(Error::ShapeMismatch(format!("peak ({x}, {y}) outside the {what} map")));
        }
        sum += fabs(pred.get(x, y, 0) - target.get(x, y, 0)) + fabs(pred.get(x, y, 1) - target.get(x, y, 1));
    }
    Ok(sum / peaks.len() as f64)
}

/// Mean L1 error of the offset map at the given peak cells (0 without peaks).
pub fn offset_loss(pred: &FeatureMap, target: &FeatureMap, peaks: &[(usize, usize)]) -> Result<f64> {
    l1_at_peaks(pred, target, peaks, "offset")
}

/// Mean L1 error of the size map at the given peak cells (0 without peaks).
pub fn wh_loss(pred: &FeatureMap, target: &FeatureMap, peaks: &[(usize, usize)]) -> Result<f64> {
    l1_at_peaks(pred, target, peaks, "wh")
}

fn check_pair(pred: &TargetMaps, target: &TargetMaps) -> Result<()> {
    pred.hm.check_same_shape(&target.hm, "heatmap")?;
    pred.wh.check_same_shape(&target.wh, "wh")?;
    pred.offset.check_same_shape(&target.offset, "offset")?;
    if pred.wh.width() != pred.hm.width() || pred.offset.height() != pred.hm.height() {
        return Err(Error::ShapeMismatch(format!(
            "maps disagree on the grid: hm {:?}, wh {:?}, offset {:?}",
            pred.hm.shape(),
            pred.wh.shape(),
            pred.offset.shape()
        )));
    }
    Ok(())
}

/// All three components and their weighted sum. Peaks are the target
/// heatmap cells equal to 1.
pub fn total_loss(pred: &TargetMaps, target: &TargetMaps, cfg: &LossConfig) -> Result<LossReport> {
    cfg.validate()?;
    check_pair(pred, target)?;
    let peaks = target.peak_cells();
    let l_hm = heatmap_loss(&pred.hm, &target.hm, cfg)?;
    let l_wh = wh_loss(&pred.wh, &target.wh, &peaks)?;
    let l_offset = offset_loss(&pred.offset, &target.offset, &peaks)?;
    Ok(LossReport::combine(l_hm, l_wh, l_offset, peaks.len(), cfg))
}

/// Partial derivatives of [`total_loss`] with respect to every prediction
/// value, returned in the shape of the predictions.
///
/// Heatmap entries that the clamp moved get zero gradient. The L1
/// subgradient at `Y = G` is taken as 0, and size/offset entries off the
/// peaks are 0.
pub fn loss_gradients(pred: &TargetMaps, target: &TargetMaps, cfg: &LossConfig) -> Result<TargetMaps> {
    cfg.validate()?;
    check_pair(pred, target)?;
    let peaks = target.peak_cells();
    let n = normalizer(peaks.len());
    let (lo, hi) = (cfg.epsilon, 1.0 - cfg.epsilon);
    let a = cfg.alpha;

    let hm_grad: Vec<f64> = pred
        .hm
        .as_slice()
        .iter()
        .zip(target.hm.as_slice())
        .map(|(&y, &g)| {
            if !(lo..=hi).contains(&y) {
                return 0.0;
            }
            let d = if g == 1.0 {
                -a * pow(1.0 - y, a - 1.0) * ln(y) + pow(1.0 - y, a) / y
            } else {
                pow(1.0 - g, cfg.beta) * (a * pow(y, a - 1.0) * ln(1.0 - y) - pow(y, a) / (1.0 - y))
            };
            -d / n
        })
        .collect();

    let (w, h) = (pred.hm.width(), pred.hm.height());
    let mut grads = TargetMaps {
        hm: FeatureMap::from_vec(w, h, 1, hm_grad)?,
        wh: FeatureMap::zeros(pred.wh.width(), pred.wh.height(), 2),
        offset: FeatureMap::zeros(pred.offset.width(), pred.offset.height(), 2),
    };
    if peaks.is_empty() {
        return Ok(grads);
    }
    let np = peaks.len() as f64;
    for &(x, y) in &peaks {
        for c in 0..2 {
            let dw = sign(pred.wh.get(x, y, c) - target.wh.get(x, y, c));
            grads.wh.set(x, y, c, dw * cfg.lambda_wh / np);
            let doff = sign(pred.offset.get(x, y, c) - target.offset.get(x, y, c));
            grads.offset.set(x, y, c, doff * cfg.lambda_offset / np);
        }
    }
    Ok(grads)
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn map(w: usize, h: usize, c: usize, data: Vec<f64>) -> FeatureMap {
        FeatureMap::from_vec(w, h, c, data).unwrap()
    }

    #[test]
    fn single_peak_half_confidence() {
        let l = heatmap_loss(&map(1, 1, 1, vec![0.5]), &map(1, 1, 1, vec![1.0]), &LossConfig::default()).unwrap();
        let expect = -(0.5f64 * 0.5) * 0.5f64.ln();
        assert!((l - expect).abs() < 1e-15);
        assert!((l - 0.1733).abs() < 1e-4);
    }

    #[test]
    fn zero_prediction_on_a_tail_cell_costs_nothing() {
        let g = map(2, 1, 1, vec![1.0, (-0.5f64).exp()]);
        let with_tail = heatmap_loss(&map(2, 1, 1, vec![0.5, 0.0]), &g, &LossConfig::default()).unwrap();
        let peak_only = heatmap_loss(&map(1, 1, 1, vec![0.5]), &map(1, 1, 1, vec![1.0]), &LossConfig::default()).unwrap();
        assert!((with_tail - peak_only).abs() < 1e-12);
    }

    #[test]
    fn exact_prediction_has_near_zero_loss() {
        let g = map(3, 1, 1, vec![1.0, 0.6, 0.0]);
        let y = map(3, 1, 1, vec![1.0, 0.0, 0.0]);
        let l = heatmap_loss(&y, &g, &LossConfig::default()).unwrap();
        assert!(l.abs() < 1e-12, "{l}");
    }

    #[test]
    fn no_peaks_still_penalizes_false_positives() {
        let g = map(2, 1, 1, vec![0.0, 0.0]);
        let y = map(2, 1, 1, vec![0.9, 0.0]);
        let l = heatmap_loss(&y, &g, &LossConfig::default()).unwrap();
        assert!((l + 0.81 * 0.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn offset_and_wh_examples() {
        let peaks = [(0usize, 0usize)];
        let off = offset_loss(&map(1, 1, 2, vec![0.5, 0.5]), &map(1, 1, 2, vec![0.25, 0.5]), &peaks).unwrap();
        assert_eq!(off, 0.25);
        let wh = wh_loss(&map(1, 1, 2, vec![44.0, 70.0]), &map(1, 1, 2, vec![40.0, 80.0]), &peaks).unwrap();
        assert_eq!(wh, 14.0);
        let two = wh_loss(
            &map(2, 1, 2, vec![44.0, 70.0, 13.0, 9.0]),
            &map(2, 1, 2, vec![40.0, 80.0, 10.0, 6.0]),
            &[(0, 0), (1, 0)],
        )
        .unwrap();
        assert_eq!(two, 10.0);
        assert_eq!(wh_loss(&map(1, 1, 2, vec![1.0, 1.0]), &map(1, 1, 2, vec![0.0, 0.0]), &[]).unwrap(), 0.0);
    }

    #[test]
    fn non_peak_cells_do_not_affect_l1() {
        let g = map(2, 1, 2, vec![0.3, 0.7, 0.0, 0.0]);
        let a = offset_loss(&map(2, 1, 2, vec![0.3, 0.7, 5.0, -3.0]), &g, &[(0, 0)]).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn weighted_total() {
        let r = LossReport::combine(1.0, 14.0, 0.25, 1, &LossConfig::default());
        assert_eq!(r.total, 2.65);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let err = heatmap_loss(&map(2, 1, 1, vec![0.0; 2]), &map(1, 2, 1, vec![0.0; 2]), &LossConfig::default());
        assert!(matches!(err, Err(Error::ShapeMismatch(_))));
        let err = wh_loss(&map(1, 1, 1, vec![0.0]), &map(1, 1, 1, vec![0.0]), &[(0, 0)]);
        assert!(matches!(err, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn l1_gradients_are_scaled_signs() {
        let mut target = TargetMaps::zeros(4);
        target.hm.set(1, 2, 0, 1.0);
        target.wh.set(1, 2, 0, 40.0);
        target.wh.set(1, 2, 1, 80.0);
        target.offset.set(1, 2, 0, 0.25);
        let mut pred = target.clone();
        pred.hm.as_mut_slice().iter_mut().for_each(|v| *v = v.clamp(0.2, 0.8));
        pred.wh.set(1, 2, 0, 44.0);
        pred.wh.set(1, 2, 1, 70.0);
        pred.wh.set(3, 3, 0, 99.0);
        let cfg = LossConfig::default();
        let g = loss_gradients(&pred, &target, &cfg).unwrap();
        assert_eq!(g.wh.get(1, 2, 0), cfg.lambda_wh);
        assert_eq!(g.wh.get(1, 2, 1), -cfg.lambda_wh);
        assert_eq!(g.wh.get(3, 3, 0), 0.0);
        // offset sits at its optimum
        assert_eq!(g.offset.get(1, 2, 0), 0.0);
        assert_eq!(g.offset.get(1, 2, 1), 0.0);
    }
}
