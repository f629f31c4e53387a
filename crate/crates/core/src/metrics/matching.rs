use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::io::{polygon_to_mask, DetectionRecord, LabelRecord};
use crate::mask::BinaryMask;
use crate::metrics::{mask_iou, ConfusionCounts, ScoredFlag};

/// Anything two instances can be compared by.
pub trait InstanceGeometry {
    fn overlap(&self, other: &Self) -> f64;
}

impl InstanceGeometry for BBox<f64> {
    fn overlap(&self, other: &Self) -> f64 {
        iou(self, other)
    }
}

impl InstanceGeometry for BinaryMask {
    fn overlap(&self, other: &Self) -> f64 {
        mask_iou(self, other).unwrap_or(0.0)
    }
}

/// A missing geometry overlaps nothing.
impl<G: InstanceGeometry> InstanceGeometry for Option<G> {
    fn overlap(&self, other: &Self) -> f64 {
        match (self, other) {
            (Some(a), Some(b)) => a.overlap(b),
            _ => 0.0,
        }
    }
}

/// Outcome of matching one image's predictions against its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Per prediction, in input order.
    pub is_tp: Vec<bool>,
    /// Ground-truth index each prediction claimed, in input order.
    pub matched_gt: Vec<Option<usize>>,
    /// Ground truths left unmatched.
    pub fn_count: usize,
}

impl MatchResult {
    pub fn counts(&self) -> ConfusionCounts {
        let tp = self.is_tp.iter().filter(|&&t| t).count() as u64;
        ConfusionCounts::new(tp, self.is_tp.len() as u64 - tp, self.fn_count as u64, 0)
    }

    pub fn scored_flags(&self, scores: &[f64]) -> Vec<ScoredFlag> {
        scores.iter().zip(&self.is_tp).map(|(&score, &tp)| ScoredFlag { score, tp }).collect()
    }
}

/// Greedy matching: predictions are visited by descending score (input order
/// on ties) and each claims the unmatched ground truth of highest overlap,
/// provided the overlap reaches `iou_thresh`. Equal overlaps go to the lower
/// ground-truth index.
pub fn match_instances<G: InstanceGeometry>(scores: &[f64], preds: &[G], gts: &[G], iou_thresh: f64) -> Result<MatchResult> {
    if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
        return Err(Error::UndefinedMetric(format!("IoU threshold must lie in (0, 1], got {iou_thresh}")));
    }
    if scores.len() != preds.len() {
        return Err(Error::InvalidShape(format!("{} scores for {} predictions", scores.len(), preds.len())));
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut taken = vec![false; gts.len()];
    let mut matched_gt = vec![None; preds.len()];
    for i in order {
        let mut best: Option<(usize, f64)> = None;
        for (j, gt) in gts.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let o = preds[i].overlap(gt);
            if o >= iou_thresh && best.is_none_or(|(_, b)| o > b) {
                best = Some((j, o));
            }
        }
        if let Some((j, _)) = best {
            taken[j] = true;
            matched_gt[i] = Some(j);
        }
    }
    Ok(MatchResult {
        is_tp: matched_gt.iter().map(Option::is_some).collect(),
        fn_count: taken.iter().filter(|&&t| !t).count(),
        matched_gt,
    })
}

/// Geometry used to compare detections with labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchMode {
    /// Axis-aligned bounding boxes in normalised coordinates.
    Box,
    /// Rasterised polygons at the given pixel extent.
    Mask { width: usize, height: usize },
}

fn label_box(poly: &[[f64; 2]]) -> Option<BBox<f64>> {
    let (mut x1, mut y1, mut x2, mut y2) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &[x, y] in poly {
        x1 = x1.min(x);
        y1 = y1.min(y);
        x2 = x2.max(x);
        y2 = y2.max(y);
    }
    BBox::from_corners(x1, y1, x2, y2).ok()
}

fn record_box(r: &DetectionRecord) -> Option<BBox<f64>> {
    r.bbox.or_else(|| r.polygon.as_deref().and_then(label_box))
}

/// Matches the detections of one image against its labels.
pub fn match_records(preds: &[DetectionRecord], gts: &[LabelRecord], iou_thresh: f64, mode: MatchMode) -> Result<MatchResult> {
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    match mode {
        MatchMode::Box => {
            let p: Vec<Option<BBox<f64>>> = preds.iter().map(record_box).collect();
            let g: Vec<Option<BBox<f64>>> = gts.iter().map(|l| label_box(&l.polygon)).collect();
            match_instances(&scores, &p, &g, iou_thresh)
        }
        MatchMode::Mask { width, height } => {
            let raster = |poly: &[[f64; 2]]| polygon_to_mask(poly, width, height).map(|r| r.mask);
            let p: Vec<Option<BinaryMask>> =
                preds.iter().map(|r| r.polygon.as_deref().map(raster).transpose()).collect::<Result<_>>()?;
            let g: Vec<Option<BinaryMask>> = gts.iter().map(|l| raster(&l.polygon).map(Some)).collect::<Result<_>>()?;
            match_instances(&scores, &p, &g, iou_thresh)
        }
    }
}
