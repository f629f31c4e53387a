//! Evaluation: recall, precision and accuracy from confusion counts, greedy
//! instance matching, PR curves and all-points average precision.

mod matching;
mod pixel;
mod pr;

pub use matching::{match_instances, match_records, InstanceGeometry, MatchMode, MatchResult};
pub use pixel::{mask_iou, pixel_confusion};
pub use pr::{average_precision, pr_curve, PrCurve, PrPoint, ScoredFlag};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Confusion counts. `tn` is only meaningful for pixel-level counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_, tn: self.tn + o.tn }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// `tp / (tp + fn)`.
pub fn recall(c: &ConfusionCounts) -> Result<f64> {
    let d = c.tp + c.fn_;
    if d == 0 {
        return Err(Error::UndefinedMetric("recall with tp + fn = 0".into()));
    }
    Ok(c.tp as f64 / d as f64)
}

/// `tp / (tp + fp)`.
pub fn precision(c: &ConfusionCounts) -> Result<f64> {
    let d = c.tp + c.fp;
    if d == 0 {
        return Err(Error::UndefinedMetric("precision with tp + fp = 0".into()));
    }
    Ok(c.tp as f64 / d as f64)
}

/// `(tp + tn) / (tp + tn + fp + fn)`.
pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    let d = c.total();
    if d == 0 {
        return Err(Error::UndefinedMetric("accuracy with no samples".into()));
    }
    Ok((c.tp + c.tn) as f64 / d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recall_cases() {
        assert_eq!(recall(&ConfusionCounts::new(78, 0, 22, 0)).unwrap(), 0.78);
        assert_eq!(recall(&ConfusionCounts::new(5, 0, 0, 0)).unwrap(), 1.0);
        assert_eq!(recall(&ConfusionCounts::new(0, 0, 7, 0)).unwrap(), 0.0);
        assert!(matches!(recall(&ConfusionCounts::new(0, 3, 0, 9)), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn precision_cases() {
        assert_eq!(precision(&ConfusionCounts::new(9, 1, 0, 0)).unwrap(), 0.9);
        assert_eq!(precision(&ConfusionCounts::new(0, 3, 0, 0)).unwrap(), 0.0);
        assert_eq!(precision(&ConfusionCounts::new(4, 4, 0, 0)).unwrap(), 0.5);
        assert!(precision(&ConfusionCounts::new(0, 0, 4, 0)).is_err());
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&ConfusionCounts::new(3, 1, 1, 5)).unwrap(), 0.8);
        assert_eq!(accuracy(&ConfusionCounts::new(0, 0, 0, 12)).unwrap(), 1.0);
        assert_eq!(accuracy(&ConfusionCounts::new(1, 1, 1, 1)).unwrap(), 0.5);
        assert!(accuracy(&ConfusionCounts::default()).is_err());
    }
}
