//! Detections file: a JSON array of `{pair_id, cx, cy, w, h, score}`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use changeforge_core::codec::Detection;
use changeforge_core::ChangeBox;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::manifest::Manifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub pair_id: String,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

impl DetectionRecord {
    pub fn new(pair_id: &str, d: &Detection) -> Self {
        Self {
            pair_id: pair_id.into(),
            cx: d.bbox.cx,
            cy: d.bbox.cy,
            w: d.bbox.w,
            h: d.bbox.h,
            score: d.score,
        }
    }

    pub fn detection(&self) -> Detection {
        Detection {
            bbox: ChangeBox::new(self.cx, self.cy, self.w, self.h),
            score: self.score,
        }
    }
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionRecord>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<DetectionRecord> =
        serde_json::from_slice(&bytes).map_err(|source| Error::Json { path: path.into(), source })?;
    if let Some(r) = records.iter().find(|r| !r.score.is_finite()) {
        return Err(Error::record(&r.pair_id, format!("non-finite score {}", r.score)));
    }
    Ok(records)
}

pub fn write_detections(path: impl AsRef<Path>, records: &[DetectionRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut bytes =
        serde_json::to_vec_pretty(records).map_err(|source| Error::Json { path: path.into(), source })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Per-pair detections and ground truth, both in manifest order.
pub type Grouped = (Vec<Vec<Detection>>, Vec<Vec<ChangeBox>>);

/// Splits detections into per-pair lists in manifest order, alongside the
/// ground truth. Detections naming a pair the manifest lacks are an error.
pub fn group_by_pair(
    records: &[DetectionRecord],
    manifest: &Manifest,
) -> Result<Grouped> {
    let index: HashMap<&str, usize> =
        manifest.records.iter().enumerate().map(|(i, r)| (r.pair_id.as_str(), i)).collect();
    let mut dets = vec![Vec::new(); manifest.records.len()];
    for r in records {
        let i = *index
            .get(r.pair_id.as_str())
            .ok_or_else(|| Error::record(&r.pair_id, "detection for a pair not in the manifest"))?;
        dets[i].push(r.detection());
    }
    let gts = manifest.records.iter().map(|r| r.boxes.clone()).collect();
    Ok((dets, gts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::ImagePairRecord;

    #[test]
    fn json_shape_and_grouping() {
        let d = Detection {
            bbox: ChangeBox::new(1.0, 2.0, 3.0, 4.0),
            score: 0.5,
        };
        let rec = DetectionRecord::new("p1", &d);
        let v = serde_json::to_value(vec![rec.clone()]).unwrap();
        assert_eq!(
            v,
            serde_json::json!([{"pair_id": "p1", "cx": 1.0, "cy": 2.0, "w": 3.0, "h": 4.0, "score": 0.5}])
        );
        let pair = |id: &str| ImagePairRecord {
            reference_path: "r.png".into(),
            test_path: "t.png".into(),
            boxes: vec![ChangeBox::new(5.0, 5.0, 2.0, 2.0)],
            pair_id: id.into(),
            strategy_tag: "real".into(),
        };
        let m = Manifest::real(vec![pair("p0"), pair("p1")]);
        let (dets, gts) = group_by_pair(std::slice::from_ref(&rec), &m).unwrap();
        assert_eq!(dets, vec![vec![], vec![d]]);
        assert_eq!(gts.len(), 2);
        let stray = DetectionRecord { pair_id: "zz".into(), ..rec };
        assert!(group_by_pair(&[stray], &m).unwrap_err().to_string().contains("zz"));
    }
}
