use std::fmt::Write;

use crate::error::{Error, Result};

/// One polygon of a segmentation label file, vertices normalised to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub class_id: u32,
    pub polygon: Vec<[f64; 2]>,
}

/// Parses `class x1 y1 x2 y2 ...` lines. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn parse_label_file(text: &str) -> Result<Vec<LabelRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut tokens = raw.split_whitespace();
        let Some(class) = tokens.next() else { continue };
        let malformed = |reason: String| Error::MalformedLabel { line, reason };
        let class_id: u32 = class.parse().map_err(|_| malformed(format!("bad class id `{class}`")))?;
        let coords = tokens
            .map(|t| t.parse::<f64>().map_err(|_| malformed(format!("bad coordinate `{t}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if coords.len() % 2 != 0 {
            return Err(malformed(format!("odd coordinate count {}", coords.len())));
        }
        if coords.len() < 6 {
            return Err(malformed(format!("polygon needs at least 3 vertices, got {}", coords.len() / 2)));
        }
        if let Some(v) = coords.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange { line, reason: format!("coordinate {v} outside [0, 1]") });
        }
        let polygon = coords.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
        out.push(LabelRecord { class_id, polygon });
    }
    Ok(out)
}

/// Inverse of [`parse_label_file`]: one line per record, shortest
/// round-tripping decimal for each coordinate.
pub fn format_label_file(records: &[LabelRecord]) -> String {
    let mut s = String::new();
    for r in records {
        write!(s, "{}", r.class_id).unwrap();
        for [x, y] in &r.polygon {
            write!(s, " {x} {y}").unwrap();
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let r = parse_label_file("0 0.1 0.1 0.9 0.1 0.5 0.9\n").unwrap();
        assert_eq!(r, vec![LabelRecord { class_id: 0, polygon: vec![[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]] }]);
    }

    #[test]
    fn empty_and_blank() {
        assert!(parse_label_file("").unwrap().is_empty());
        assert_eq!(parse_label_file("\n  \n1 0 0 1 0 1 1\n").unwrap().len(), 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_label_file("0 0.1 0.2 0.3"), Err(Error::MalformedLabel { line: 1, .. })));
        assert!(matches!(parse_label_file("0 0.1 0.2 0.3 0.4"), Err(Error::MalformedLabel { .. })));
        assert!(matches!(parse_label_file("\n0 0 0 1 0 1 1.5"), Err(Error::OutOfRange { line: 2, .. })));
        assert!(matches!(parse_label_file("x 0 0 1 0 1 1"), Err(Error::MalformedLabel { .. })));
    }

    #[test]
    fn round_trip() {
        let text = "0 0.1 0.25 0.9 0.1 0.5 0.9\n3 0 0 1 0 1 1 0 1\n";
        let r = parse_label_file(text).unwrap();
        assert_eq!(format_label_file(&r), text);
    }
}
