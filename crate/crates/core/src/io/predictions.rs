use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// One scored detection. Coordinates are normalised to the image extent.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image: String,
    pub class_id: u32,
    pub score: f64,
    pub polygon: Option<Vec<[f64; 2]>>,
    /// Centre-format box.
    pub bbox: Option<BBox<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    image: String,
    class: u32,
    score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    polygon: Option<Vec<[f64; 2]>>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    bbox: Option<[f64; 4]>,
}

fn validate(l: Line, line: usize) -> Result<DetectionRecord> {
    let malformed = |reason: String| Error::MalformedPrediction { line, reason };
    if !(0.0..=1.0).contains(&l.score) {
        return Err(Error::OutOfRange { line, reason: format!("score {} outside [0, 1]", l.score) });
    }
    if l.polygon.is_none() && l.bbox.is_none() {
        return Err(malformed("record has neither polygon nor box".into()));
    }
    if let Some(p) = &l.polygon {
        if p.len() < 3 {
            return Err(malformed(format!("polygon needs at least 3 vertices, got {}", p.len())));
        }
        if let Some(v) = p.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange { line, reason: format!("polygon coordinate {v} outside [0, 1]") });
        }
    }
    let bbox = l
        .bbox
        .map(|[cx, cy, w, h]| BBox::new(cx, cy, w, h))
        .transpose()
        .map_err(|e| malformed(e.to_string()))?;
    Ok(DetectionRecord { image: l.image, class_id: l.class, score: l.score, polygon: l.polygon, bbox })
}

/// One JSON object per nonempty line with keys `image`, `class`, `score`
/// and at least one of `polygon` (`[[x, y], ...]`) or `box`
/// (`[cx, cy, w, h]`).
pub fn read_predictions(text: &str) -> Result<Vec<DetectionRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(raw).map_err(|e| Error::MalformedPrediction { line, reason: e.to_string() })?;
        out.push(validate(l, line)?);
    }
    Ok(out)
}

pub fn format_predictions(records: &[DetectionRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let l = Line {
            image: r.image.clone(),
            class: r.class_id,
            score: r.score,
            polygon: r.polygon.clone(),
            bbox: r.bbox.map(|b| b.to_array()),
        };
        s.push_str(&serde_json::to_string(&l).expect("prediction serialises"));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: &str = r#"{"image":"a","class":0,"score":0.9,"polygon":[[0.1,0.1],[0.9,0.1],[0.5,0.9]]}"#;

    #[test]
    fn one_record() {
        let r = read_predictions(TRI).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].score, 0.9);
        assert_eq!(r[0].polygon.as_ref().unwrap().len(), 3);
    }

    #[test]
    fn score_out_of_range() {
        let text = TRI.replace("0.9,\"polygon", "1.5,\"polygon");
        assert!(matches!(read_predictions(&text), Err(Error::OutOfRange { line: 1, .. })));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(read_predictions("\n{not json"), Err(Error::MalformedPrediction { line: 2, .. })));
        let no_geom = r#"{"image":"a","class":0,"score":0.5}"#;
        assert!(matches!(read_predictions(no_geom), Err(Error::MalformedPrediction { .. })));
        let two = r#"{"image":"a","class":0,"score":0.5,"polygon":[[0,0],[1,1]]}"#;
        assert!(matches!(read_predictions(two), Err(Error::MalformedPrediction { .. })));
    }

    #[test]
    fn order_and_round_trip() {
        let boxed = r#"{"image":"b","class":0,"score":0.25,"box":[0.5,0.5,0.2,0.1]}"#;
        let text = format!("{TRI}\n{boxed}\n");
        let r = read_predictions(&text).unwrap();
        assert_eq!(r.iter().map(|r| r.image.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(format_predictions(&r), text);
    }
}
