use crate::error::{shape_err, Result};
use crate::mask::BinaryMask;

/// Rasterised polygon. `degenerate` is set when the polygon encloses no
/// area; the mask is then empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Rasterized {
    pub mask: BinaryMask,
    pub degenerate: bool,
}

/// Even-odd crossing test (the classic PNPOLY loop). Points exactly on a
/// left or bottom edge count as inside, on a right or top edge as outside.
pub fn point_in_polygon(poly: &[[f64; 2]], px: f64, py: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let [xi, yi] = poly[i];
        let [xj, yj] = poly[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let [x0, y0] = poly[i];
            let [x1, y1] = poly[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum::<f64>()
        / 2.0
}

/// Fills a normalised polygon on a `width x height` grid: a pixel is set iff
/// its centre `(col + 0.5, row + 0.5)` lies inside the polygon scaled by the
/// extents. Each row is scanned once; the crossing rule matches
/// [`point_in_polygon`] exactly.
pub fn polygon_to_mask(poly: &[[f64; 2]], width: usize, height: usize) -> Result<Rasterized> {
    if width == 0 || height == 0 {
        return shape_err(format!("raster extents must be positive, got {width}x{height}"));
    }
    let pts: Vec<[f64; 2]> = poly.iter().map(|&[x, y]| [x * width as f64, y * height as f64]).collect();
    let mut mask = BinaryMask::empty(height, width);
    if pts.len() < 3 || shoelace(&pts) == 0.0 {
        return Ok(Rasterized { mask, degenerate: true });
    }
    let n = pts.len();
    let mut xs = Vec::new();
    for r in 0..height {
        let py = r as f64 + 0.5;
        xs.clear();
        for i in 0..n {
            let [xi, yi] = pts[i];
            let [xj, yj] = pts[(i + n - 1) % n];
            if (yi > py) != (yj > py) {
                xs.push((xj - xi) * (py - yi) / (yj - yi) + xi);
            }
        }
        xs.sort_by(f64::total_cmp);
        for c in 0..width {
            let px = c as f64 + 0.5;
            // crossings strictly right of the centre
            let right = xs.len() - xs.partition_point(|&x| x <= px);
            if right % 2 == 1 {
                mask.set(r, c, true);
            }
        }
    }
    Ok(Rasterized { mask, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_frame() {
        let r = polygon_to_mask(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], 7, 5).unwrap();
        assert_eq!(r.mask.count(), 35);
        assert!(!r.degenerate);
    }

    #[test]
    fn thin_strip_misses_centres() {
        // covers y in [0, 0.4) of row 0, whose centre is at 0.5
        let r = polygon_to_mask(&[[0.0, 0.0], [1.0, 0.0], [1.0, 0.04], [0.0, 0.04]], 10, 10).unwrap();
        assert_eq!(r.mask.count(), 0);
    }

    #[test]
    fn degenerate_flagged() {
        let r = polygon_to_mask(&[[0.1, 0.1], [0.5, 0.5], [0.9, 0.9]], 8, 8).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.mask.count(), 0);
        assert!(polygon_to_mask(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 0, 3).is_err());
    }

    #[test]
    fn half_square_area() {
        let sq = [[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]];
        let r = polygon_to_mask(&sq, 256, 256).unwrap();
        assert!((r.mask.count() as i64 - 16384).abs() <= 256);
    }
}
