//! Crack mask analysis: binarisation, 8-connected components, exact Euclidean
//! distance transform, thinning, and per-component width reports.
//!
//! Width at a skeleton pixel is the diameter of the largest pixel-centred
//! disk that fits in the foreground there: `2 * edt - 1`, where `edt` is the
//! distance to the nearest background pixel centre.

mod components;
mod edt;
mod skeleton;
mod width;

pub use components::{connected_components, CrackComponent};
pub use edt::{distance_transform, squared_distance_transform, BorderMode, DistanceField};
pub use skeleton::skeletonize;
pub use width::{analyze_component, analyze_mask, width_profile, ScaleConfig, WidthReport, WidthSample};

use crate::error::{shape_err, Error, Result};

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!("{width}x{height} image needs {} pixels, got {}", width * height, pixels.len())));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

/// Foreground/background grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return shape_err(format!("{height}x{width} mask needs {} flags, got {}", height * width, bits.len()));
        }
        Ok(Self { height, width, bits })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self { height, width, bits: vec![false; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        Self { height, width, bits }
    }

    /// Builds a mask from rows of `#` (foreground) and `.` (background).
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return shape_err("ragged ascii mask");
        }
        let bits = rows.iter().flat_map(|r| r.bytes().map(|b| b == b'#')).collect();
        Self::new(rows.len(), width, bits)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get_or_background(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width && self.get(row as usize, col as usize)
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn same_extent(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Foreground coordinates in raster order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| (i / self.width, i % self.width))
    }

    /// Renders as a grayscale image with foreground 255.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage { width: self.width, height: self.height, pixels: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect() }
    }
}

pub const DEFAULT_THRESHOLD: u8 = 128;

/// Foreground where the pixel value is at least `thresh`.
pub fn threshold_mask(gray: &GrayImage, thresh: u8) -> Result<BinaryMask> {
    if gray.width == 0 || gray.height == 0 {
        return Err(Error::InvalidImage("empty image".into()));
    }
    BinaryMask::new(gray.height, gray.width, gray.pixels.iter().map(|&v| v >= thresh).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_cases() {
        let white = GrayImage::new(3, 2, vec![255; 6]).unwrap();
        assert_eq!(threshold_mask(&white, DEFAULT_THRESHOLD).unwrap().count(), 6);
        let black = GrayImage::new(3, 2, vec![0; 6]).unwrap();
        assert_eq!(threshold_mask(&black, DEFAULT_THRESHOLD).unwrap().count(), 0);
        let checker = GrayImage::from_fn(4, 4, |r, c| if (r + c) % 2 == 0 { 100 } else { 200 });
        let m = threshold_mask(&checker, 128).unwrap();
        assert!(m.foreground().all(|(r, c)| (r + c) % 2 == 1));
        assert_eq!(m.count(), 8);
    }

    #[test]
    fn empty_image_rejected() {
        let img = GrayImage::new(0, 0, vec![]).unwrap();
        assert!(matches!(threshold_mask(&img, 128), Err(Error::InvalidImage(_))));
    }

    #[test]
    fn ascii_builder() {
        let m = BinaryMask::from_ascii(&["#.", ".#"]).unwrap();
        assert!(m.get(0, 0) && m.get(1, 1) && !m.get(0, 1));
        assert!(!m.get_or_background(-1, 0));
        assert!(BinaryMask::from_ascii(&["#.", "#"]).is_err());
    }
}
