use serde::Serialize;

use crate::error::{Error, Result};

/// A prediction's score and whether it matched a ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredFlag {
    pub score: f64,
    pub tp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Points in strictly decreasing threshold order.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    /// False when there were no predictions: the single point then carries
    /// precision 0 as a placeholder.
    pub precision_defined: bool,
}

/// Cumulative precision and recall at every distinct score, highest first.
pub fn pr_curve(flags: &[ScoredFlag], total_gt: usize) -> Result<PrCurve> {
    if total_gt == 0 {
        return Err(Error::UndefinedMetric("PR curve needs at least one ground truth".into()));
    }
    if flags.is_empty() {
        return Ok(PrCurve { points: vec![PrPoint { threshold: 1.0, precision: 0.0, recall: 0.0 }], precision_defined: false });
    }
    let mut sorted = flags.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (i, f) in sorted.iter().enumerate() {
        if f.tp {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = sorted.get(i + 1).is_none_or(|n| n.score != f.score);
        if last_of_group {
            points.push(PrPoint {
                threshold: f.score,
                precision: tp as f64 / (tp + fp) as f64,
                recall: tp as f64 / total_gt as f64,
            });
        }
    }
    Ok(PrCurve { points, precision_defined: true })
}

/// Area under the precision envelope `p(r) = max_{r' >= r} p(r')`, summed
/// over every recall step (all-points interpolation).
pub fn average_precision(curve: &PrCurve) -> Result<f64> {
    let pts = &curve.points;
    if pts.is_empty() {
        return Err(Error::UndefinedMetric("average precision of an empty curve".into()));
    }
    let mut envelope = vec![0.0; pts.len()];
    let mut running = 0.0f64;
    for i in (0..pts.len()).rev() {
        running = running.max(pts[i].precision);
        envelope[i] = running;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in pts.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    Ok(ap.clamp(0.0, 1.0))
}
