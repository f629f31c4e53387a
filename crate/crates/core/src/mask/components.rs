use std::collections::VecDeque;

use crate::geometry::BBox;
use crate::mask::BinaryMask;

/// One 8-connected foreground region.
#[derive(Debug, Clone, PartialEq)]
pub struct CrackComponent {
    /// 1-based, assigned by descending area.
    pub id: usize,
    /// Pixel coordinates `(row, col)` in raster order.
    pub pixels: Vec<(usize, usize)>,
    /// Pixel-aligned bounding box: column `c` spans `[c, c + 1)`.
    pub bbox: BBox<f64>,
}

impl CrackComponent {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn to_mask(&self, height: usize, width: usize) -> BinaryMask {
        let mut m = BinaryMask::empty(height, width);
        for &(r, c) in &self.pixels {
            m.set(r, c, true);
        }
        m
    }
}

pub(crate) const NEIGHBORS8: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// 8-connected components, largest first. Equal areas are ordered by their
/// first pixel in raster order.
pub fn connected_components(m: &BinaryMask) -> Vec<CrackComponent> {
    let (h, w) = (m.height(), m.width());
    let mut seen = vec![false; h * w];
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut queue = VecDeque::new();
    for (r0, c0) in m.foreground() {
        if seen[r0 * w + c0] {
            continue;
        }
        seen[r0 * w + c0] = true;
        queue.push_back((r0, c0));
        let mut pixels = Vec::new();
        while let Some((r, c)) = queue.pop_front() {
            pixels.push((r, c));
            for (dr, dc) in NEIGHBORS8 {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if m.get_or_background(nr, nc) {
                    let idx = nr as usize * w + nc as usize;
                    if !seen[idx] {
                        seen[idx] = true;
                        queue.push_back((nr as usize, nc as usize));
                    }
                }
            }
        }
        pixels.sort_unstable();
        groups.push(pixels);
    }
    // discovery order is raster order of first pixels, so a stable sort by
    // area keeps the tie-break
    groups.sort_by(|a, b| b.len().cmp(&a.len()));
    groups
        .into_iter()
        .enumerate()
        .map(|(i, pixels)| {
            let rmin = pixels.iter().map(|p| p.0).min().unwrap_or(0);
            let rmax = pixels.iter().map(|p| p.0).max().unwrap_or(0);
            let cmin = pixels.iter().map(|p| p.1).min().unwrap_or(0);
            let cmax = pixels.iter().map(|p| p.1).max().unwrap_or(0);
            let bbox = BBox::from_corners(cmin as f64, rmin as f64, (cmax + 1) as f64, (rmax + 1) as f64)
                .expect("component bbox has positive size");
            CrackComponent { id: i + 1, pixels, bbox }
        })
        .collect()
}
