use crate::error::{shape_err, Result};
use crate::mask::BinaryMask;
use crate::metrics::ConfusionCounts;

/// `|a & b| / |a | b|`, 1 when both masks are empty.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if !a.same_extent(b) {
        return shape_err(format!("mask extents differ: {}x{} vs {}x{}", a.height(), a.width(), b.height(), b.width()));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Per-pixel confusion of a predicted mask against ground truth.
pub fn pixel_confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    if !pred.same_extent(gt) {
        return shape_err(format!("mask extents differ: {}x{} vs {}x{}", pred.height(), pred.width(), gt.height(), gt.width()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_cases() {
        let a = BinaryMask::from_ascii(&["##..", "##.."]).unwrap();
        let b = BinaryMask::from_ascii(&["..##", "..##"]).unwrap();
        let half = BinaryMask::from_ascii(&[".##.", ".##."]).unwrap();
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &b).unwrap(), 0.0);
        assert!((mask_iou(&a, &half).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mask_iou(&BinaryMask::empty(2, 2), &BinaryMask::empty(2, 2)).unwrap(), 1.0);
        assert!(mask_iou(&a, &BinaryMask::empty(2, 3)).is_err());
    }

    #[test]
    fn confusion_cases() {
        let a = BinaryMask::from_ascii(&["#.#", ".##"]).unwrap();
        let c = pixel_confusion(&a, &a).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let inv = BinaryMask::new(2, 3, a.bits().iter().map(|b| !b).collect()).unwrap();
        let c = pixel_confusion(&a, &inv).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert_eq!(c.total(), 6);
    }
}
