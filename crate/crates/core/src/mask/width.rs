use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::components::NEIGHBORS8;
use crate::mask::{connected_components, distance_transform, skeletonize, BinaryMask, BorderMode, CrackComponent, DistanceField};

/// Optional physical pixel pitch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScaleConfig {
    mm_per_px: Option<f64>,
}

impl ScaleConfig {
    pub fn pixels_only() -> Self {
        Self { mm_per_px: None }
    }

    pub fn new(mm_per_px: Option<f64>) -> Result<Self> {
        if let Some(s) = mm_per_px {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Parse(format!("mm per pixel must be positive, got {s}")));
            }
        }
        Ok(Self { mm_per_px })
    }

    pub fn mm_per_px(&self) -> Option<f64> {
        self.mm_per_px
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthSample {
    pub pixel: (usize, usize),
    pub width: f64,
}

/// Widths of one crack component. Serialises with these keys in this order;
/// the millimetre fields are omitted when no scale is configured.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthReport {
    pub component_id: usize,
    pub area_px: usize,
    pub max_width_px: f64,
    pub max_width_location: (usize, usize),
    pub min_width_px: f64,
    pub min_width_location: (usize, usize),
    pub skeleton_length_px: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_width_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_width_mm: Option<f64>,
}

/// `2 * edt - 1` at every skeleton pixel of the component, in raster order.
pub fn width_profile(c: &CrackComponent, edt: &DistanceField, skeleton: &BinaryMask) -> Result<Vec<WidthSample>> {
    let profile: Vec<WidthSample> = c
        .pixels
        .iter()
        .filter(|&&(r, col)| skeleton.get(r, col))
        .map(|&(r, col)| WidthSample { pixel: (r, col), width: 2.0 * edt.get(r, col) - 1.0 })
        .collect();
    if profile.is_empty() {
        return Err(Error::DegenerateComponent(c.id));
    }
    Ok(profile)
}

fn skeleton_degree(skeleton: &BinaryMask, (r, c): (usize, usize)) -> usize {
    NEIGHBORS8
        .iter()
        .filter(|(dr, dc)| skeleton.get_or_background(r as isize + dr, c as isize + dc))
        .count()
}

fn skeleton_neighbors(skeleton: &BinaryMask, (r, c): (usize, usize)) -> impl Iterator<Item = (usize, usize)> + '_ {
    NEIGHBORS8.iter().filter_map(move |&(dr, dc)| {
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        skeleton.get_or_background(nr, nc).then_some((nr as usize, nc as usize))
    })
}

/// Skeleton pixels on the tapering ends: every tip, plus the pixels reached
/// by walking inward from a tip along a simple chain while the width keeps
/// strictly increasing. Thinning leaves short diagonal tails into convex
/// corners whose widths climb from 1 to the true width; the walk drops them.
fn taper_pixels(c: &CrackComponent, edt: &DistanceField, skeleton: &BinaryMask) -> HashSet<(usize, usize)> {
    let width = |(r, col): (usize, usize)| 2.0 * edt.get(r, col) - 1.0;
    let mut out = HashSet::new();
    for &p in c.pixels.iter().filter(|&&p| skeleton.get(p.0, p.1)) {
        if skeleton_degree(skeleton, p) >= 2 {
            continue;
        }
        out.insert(p);
        let mut cur = p;
        loop {
            let next: Vec<_> = skeleton_neighbors(skeleton, cur).filter(|n| !out.contains(n)).collect();
            match next[..] {
                [n] if skeleton_degree(skeleton, n) <= 2 && width(n) > width(cur) => {
                    out.insert(n);
                    cur = n;
                }
                _ => break,
            }
        }
    }
    out
}

/// Maximum and minimum width with their skeleton locations.
///
/// Tapering ends (see [`taper_pixels`]) are left out of the minimum whenever
/// the skeleton has any other pixel. Ties go to the smallest `(row, col)`.
pub fn analyze_component(c: &CrackComponent, edt: &DistanceField, skeleton: &BinaryMask, scale: ScaleConfig) -> Result<WidthReport> {
    if c.pixels.is_empty() {
        return Err(Error::DegenerateComponent(c.id));
    }
    let profile = width_profile(c, edt, skeleton)?;
    // profile is in raster order, so strict comparisons keep the first pixel
    let mut max = profile[0];
    for s in &profile[1..] {
        if s.width > max.width {
            max = *s;
        }
    }
    let taper = taper_pixels(c, edt, skeleton);
    let interior: Vec<&WidthSample> = profile.iter().filter(|s| !taper.contains(&s.pixel)).collect();
    let pool: Vec<&WidthSample> = if interior.is_empty() { profile.iter().collect() } else { interior };
    let mut min = *pool[0];
    for s in &pool[1..] {
        if s.width < min.width {
            min = **s;
        }
    }
    let mm = scale.mm_per_px();
    Ok(WidthReport {
        component_id: c.id,
        area_px: c.area(),
        max_width_px: max.width,
        max_width_location: max.pixel,
        min_width_px: min.width,
        min_width_location: min.pixel,
        skeleton_length_px: profile.len(),
        max_width_mm: mm.map(|s| max.width * s),
        min_width_mm: mm.map(|s| min.width * s),
    })
}

/// Components, distance field and skeleton of `mask`, then one report per
/// component in id order.
pub fn analyze_mask(mask: &BinaryMask, scale: ScaleConfig, border: BorderMode) -> Result<Vec<WidthReport>> {
    let edt = distance_transform(mask, border);
    let skeleton = skeletonize(mask);
    connected_components(mask).iter().map(|c| analyze_component(c, &edt, &skeleton, scale)).collect()
}
