//! Zhang–Suen thinning.
//!
//! Each sub-iteration marks deletion candidates with the classic Zhang–Suen
//! tests, all evaluated on the image as it was at the start of the
//! sub-iteration. Candidates are then removed in raster order, and a candidate
//! is kept if removing it from the partially thinned image would no longer be
//! a simple deletion (8-connectivity number other than 1, or fewer than two
//! foreground neighbours). The commit step is what stops the plain parallel
//! rule from erasing 2×2 blocks and two-pixel-thick diagonals, so every
//! component keeps at least one pixel and stays connected.

use crate::mask::BinaryMask;

/// Neighbours `P2..P9`: N, NE, E, SE, S, SW, W, NW.
fn ring(m: &BinaryMask, r: usize, c: usize) -> [bool; 8] {
    let (r, c) = (r as isize, c as isize);
    [
        m.get_or_background(r - 1, c),
        m.get_or_background(r - 1, c + 1),
        m.get_or_background(r, c + 1),
        m.get_or_background(r + 1, c + 1),
        m.get_or_background(r + 1, c),
        m.get_or_background(r + 1, c - 1),
        m.get_or_background(r, c - 1),
        m.get_or_background(r - 1, c - 1),
    ]
}

fn zs_candidate(p: &[bool; 8], first: bool) -> bool {
    let b = p.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = *p;
    if first {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

/// Yokoi 8-connectivity number; 1 means removing the pixel changes no
/// topology.
fn connectivity8(p: &[bool; 8]) -> usize {
    // reorder to E, NE, N, NW, W, SW, S, SE (counter-clockwise from east)
    let x = [p[2], p[1], p[0], p[7], p[6], p[5], p[4], p[3]];
    let nb = |i: usize| usize::from(!x[i % 8]);
    (0..4).map(|k| 2 * k).map(|k| nb(k) - nb(k) * nb(k + 1) * nb(k + 2)).sum()
}

/// Thinned copy of `m`. Pixels outside the image count as background.
pub fn skeletonize(m: &BinaryMask) -> BinaryMask {
    let mut img = m.clone();
    loop {
        let mut changed = false;
        for first in [true, false] {
            let candidates: Vec<(usize, usize)> =
                img.foreground().filter(|&(r, c)| zs_candidate(&ring(&img, r, c), first)).collect();
            for (r, c) in candidates {
                let p = ring(&img, r, c);
                if p.iter().filter(|&&v| v).count() >= 2 && connectivity8(&p) == 1 {
                    img.set(r, c, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return img;
        }
    }
}
