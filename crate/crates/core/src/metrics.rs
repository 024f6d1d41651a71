//! IoU, single-class AP at a fixed IoU threshold, and the generalization
//! distance over a method × testset results table.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::boxes::ChangeBox;
use crate::codec::Detection;
use crate::error::{invalid, Error, Result};
use crate::math::sqrt;

/// Intersection over union of two boxes (0 when either has no area).
pub fn iou(a: &ChangeBox, b: &ChangeBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalResult {
    pub ap50: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// `(recall, precision)` after each detection in ranked order.
    pub pr_curve: Vec<(f64, f64)>,
}

/// Ranks detections from all pairs by descending score (ties by pair index,
/// then position within the pair) and greedily matches each to the
/// highest-IoU unmatched ground truth in its pair. Returns, in rank order,
/// whether each detection was a true positive.
pub fn match_detections(
    detections: &[Vec<Detection>],
    ground_truths: &[Vec<ChangeBox>],
    iou_threshold: f64,
) -> Result<Vec<bool>> {
    if detections.len() != ground_truths.len() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{} detection lists for {} ground-truth lists",
            detections.len(),
            ground_truths.len()
        )));
    }
    let mut ranked: Vec<(f64, usize, usize)> = Vec::new();
    for (p, dets) in detections.iter().enumerate() {
        for (i, d) in dets.iter().enumerate() {
            if !d.score.is_finite() {
                return Err(invalid("score", alloc::format!("pair {p} detection {i} has score {}", d.score)));
            }
            ranked.push((d.score, p, i));
        }
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut taken: Vec<Vec<bool>> = ground_truths.iter().map(|g| vec![false; g.len()]).collect();
    Ok(ranked
        .iter()
        .map(|&(_, p, i)| {
            let det = &detections[p][i].bbox;
            let best = ground_truths[p]
                .iter()
                .enumerate()
                .filter(|(g, _)| !taken[p][*g])
                .map(|(g, gt)| (g, iou(det, gt)))
                .fold(None::<(usize, f64)>, |acc, (g, v)| match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((g, v)),
                });
            match best {
                Some((g, v)) if v >= iou_threshold => {
                    taken[p][g] = true;
                    true
                }
                _ => false,
            }
        })
        .collect())
}

/// Average precision with all-point interpolation: the precision envelope
/// (best precision at any equal or higher recall) integrated over recall.
///
/// Recall only moves at true positives, by `1 / n_gt` each, so the integral
/// is the sum of the envelope at every true positive divided by `n_gt`.
pub fn average_precision(
    detections: &[Vec<Detection>],
    ground_truths: &[Vec<ChangeBox>],
    iou_threshold: f64,
) -> Result<EvalResult> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(invalid("iou_threshold", "must lie in [0, 1]"));
    }
    let n_gt: usize = ground_truths.iter().map(Vec::len).sum();
    if n_gt == 0 {
        return Err(Error::Evaluation("no ground-truth boxes"));
    }
    let hits = match_detections(detections, ground_truths, iou_threshold)?;

    let mut pr_curve = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (k, &hit) in hits.iter().enumerate() {
        tp += hit as usize;
        pr_curve.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
    }

    let mut envelope = vec![0.0f64; pr_curve.len()];
    let mut best = 0.0f64;
    for k in (0..pr_curve.len()).rev() {
        best = best.max(pr_curve[k].1);
        envelope[k] = best;
    }
    let area: f64 = hits
        .iter()
        .zip(&envelope)
        .filter(|(hit, _)| **hit)
        .map(|(_, p)| *p)
        .sum();

    Ok(EvalResult {
        ap50: (area / n_gt as f64).clamp(0.0, 1.0),
        true_positives: tp,
        false_positives: hits.len() - tp,
        false_negatives: n_gt - tp,
        pr_curve,
    })
}

/// AP values for methods (rows) on testsets (columns).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResultsMatrix {
    rows: Vec<String>,
    columns: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl ResultsMatrix {
    pub fn new(rows: Vec<String>, columns: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || columns.is_empty() {
            return Err(invalid("matrix", "needs at least one row and one column"));
        }
        if values.len() != rows.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} value rows for {} labels",
                values.len(),
                rows.len()
            )));
        }
        for (label, row) in rows.iter().zip(&values) {
            if row.len() != columns.len() {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "row `{label}` has {} values for {} columns",
                    row.len(),
                    columns.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(invalid("matrix", alloc::format!("row `{label}` has AP {v} outside [0, 1]")));
            }
        }
        Ok(Self { rows, columns, values })
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Columnwise maximum over every row.
    pub fn column_best(&self) -> Vec<f64> {
        (0..self.columns.len())
            .map(|j| self.values.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// Euclidean distance from each row to the columnwise-best vector.
pub fn generalization_distance(m: &ResultsMatrix) -> Vec<f64> {
    let best = m.column_best();
    m.values
        .iter()
        .map(|row| sqrt(row.iter().zip(&best).map(|(v, b)| (b - v) * (b - v)).sum()))
        .collect()
}
