use std::fmt::Write;

use serde::Serialize;

use crate::mask::WidthReport;
use crate::metrics::PrCurve;

/// Width reports of one mask image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthDocument {
    pub image: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mm_per_px: Option<f64>,
    pub components: Vec<WidthReport>,
}

/// Evaluation summary. Undefined quantities serialise as `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub mode: String,
    pub iou_threshold: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: Option<u64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub ap: Option<f64>,
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_document<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialises");
    s.push('\n');
    s
}

/// `threshold,precision,recall` rows with six decimals.
pub fn pr_csv(curve: &PrCurve) -> String {
    let mut s = String::from("threshold,precision,recall\n");
    for p in &curve.points {
        writeln!(s, "{:.6},{:.6},{:.6}", p.threshold, p.precision, p.recall).unwrap();
    }
    s
}
