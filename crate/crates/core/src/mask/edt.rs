//! Exact Euclidean distance transform (Meijster, Roerdink and Hesselink's
//! two-phase algorithm) in integer arithmetic.

use crate::mask::BinaryMask;

/// How pixels beyond the image edge are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BorderMode {
    /// The frame is background: a region touching the edge is measured to it.
    #[default]
    Background,
    /// Only in-image background pixels count.
    Ignore,
}

/// Per-pixel distance to the nearest background pixel centre.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

/// Squared distances. With [`BorderMode::Ignore`] and no background pixel at
/// all, every entry is `u64::MAX`.
pub fn squared_distance_transform(m: &BinaryMask, border: BorderMode) -> Vec<u64> {
    let (h, w) = (m.height(), m.width());
    if h == 0 || w == 0 {
        return Vec::new();
    }
    let framed = border == BorderMode::Background;
    // larger than any realisable distance along either axis
    let inf = (h + w + 2) as i64;

    // phase 1: vertical distance to background within each column
    let mut g = vec![0i64; h * w];
    for x in 0..w {
        let top = if framed { 1 } else { inf };
        g[x] = if m.get(0, x) { top } else { 0 };
        for y in 1..h {
            g[y * w + x] = if m.get(y, x) { (g[(y - 1) * w + x] + 1).min(inf) } else { 0 };
        }
        if framed {
            let last = (h - 1) * w + x;
            g[last] = g[last].min(1);
        }
        for y in (0..h - 1).rev() {
            let below = g[(y + 1) * w + x] + 1;
            if below < g[y * w + x] {
                g[y * w + x] = below;
            }
        }
    }

    // phase 2: lower envelope of parabolas along each row; a framed row gets
    // one background column on each side
    let pad = usize::from(framed);
    let len = w + 2 * pad;
    let mut row = vec![0i64; len];
    let mut s = vec![0usize; len];
    let mut t = vec![0i64; len];
    let mut out = vec![0u64; h * w];
    let mut dt = vec![0i64; len];
    for y in 0..h {
        row[pad..pad + w].copy_from_slice(&g[y * w..(y + 1) * w]);
        if framed {
            row[0] = 0;
            row[len - 1] = 0;
        }
        let f = |x: usize, i: usize| -> i64 {
            let d = x as i64 - i as i64;
            d * d + row[i] * row[i]
        };
        let sep = |i: usize, u: usize| -> i64 {
            let (i64i, i64u) = (i as i64, u as i64);
            (i64u * i64u - i64i * i64i + row[u] * row[u] - row[i] * row[i]).div_euclid(2 * (i64u - i64i))
        };
        let mut q: isize = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..len {
            while q >= 0 && f(t[q as usize] as usize, s[q as usize]) > f(t[q as usize] as usize, u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let wpos = 1 + sep(s[q as usize], u);
                if wpos < len as i64 {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = wpos;
                }
            }
        }
        for u in (0..len).rev() {
            dt[u] = f(u, s[q as usize]);
            if u as i64 == t[q as usize] {
                q -= 1;
            }
        }
        for x in 0..w {
            let d = dt[x + pad];
            out[y * w + x] = if d >= inf * inf { u64::MAX } else { d as u64 };
        }
    }
    out
}

/// Euclidean distance field; background pixels are 0. Pixels with no
/// reachable background (only possible with [`BorderMode::Ignore`]) are
/// `f64::INFINITY`.
pub fn distance_transform(m: &BinaryMask, border: BorderMode) -> DistanceField {
    let values = squared_distance_transform(m, border)
        .into_iter()
        .map(|d| if d == u64::MAX { f64::INFINITY } else { (d as f64).sqrt() })
        .collect();
    DistanceField { height: m.height(), width: m.width(), values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel() {
        let m = BinaryMask::from_ascii(&["...", ".#.", "..."]).unwrap();
        let d = distance_transform(&m, BorderMode::Background);
        assert_eq!(d.get(1, 1), 1.0);
        assert_eq!(d.values().iter().filter(|&&v| v == 0.0).count(), 8);
    }

    #[test]
    fn all_background() {
        let d = distance_transform(&BinaryMask::empty(5, 7), BorderMode::Background);
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn border_counts_as_background() {
        let m = BinaryMask::from_fn(5, 9, |_, _| true);
        let d = distance_transform(&m, BorderMode::Background);
        assert_eq!(d.get(2, 4), 3.0);
        assert_eq!(d.get(0, 0), 1.0);
        let d = distance_transform(&m, BorderMode::Ignore);
        assert!(d.values().iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn ignore_mode_measures_to_inner_background() {
        let m = BinaryMask::from_ascii(&["####", "####", "###."]).unwrap();
        let sq = squared_distance_transform(&m, BorderMode::Ignore);
        assert_eq!(sq[0], 4 + 9);
        assert_eq!(sq[2 * 4 + 3], 0);
    }
}
