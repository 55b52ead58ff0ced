//! Homotopy-preserving thinning to a one-pixel-wide 8-connected skeleton.
//!
//! Each sweep runs four directional sub-passes (north, south, east, west).
//! A sub-pass marks border pixels in its direction that are simple and not
//! end points, then deletes them in raster order, re-testing simplicity of
//! each candidate against the partially thinned image before removal. Foreground uses
//! 8-connectivity, background 4-connectivity.

use std::sync::OnceLock;

use super::BinaryMask;

// Ring order: E, NE, N, NW, W, SW, S, SE.
const RING: [(i64, i64); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Direction offsets of the four sub-passes: N, S, E, W.
const PASSES: [(i64, i64); 4] = [(0, -1), (0, 1), (1, 0), (-1, 0)];

pub fn skeletonize(mask: &BinaryMask) -> BinaryMask {
    let lut = simple_lut();
    let mut img = mask.clone();
    let (w, h) = img.dims();
    let mut candidates = Vec::new();
    loop {
        let mut changed = false;
        for (dx, dy) in PASSES {
            candidates.clear();
            for y in 0..h {
                for x in 0..w {
                    if img.get(x, y)
                        && !img.get_signed(x as i64 + dx, y as i64 + dy)
                        && deletable(&img, x, y, lut)
                    {
                        candidates.push((x, y));
                    }
                }
            }
            // end-point status is frozen at marking time; simplicity is
            // re-tested against the current image
            for &(x, y) in &candidates {
                if lut[ring_code(&img, x, y) as usize] {
                    img.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return img;
        }
    }
}

fn ring_code(img: &BinaryMask, x: usize, y: usize) -> u8 {
    let mut code = 0u8;
    for (k, (dx, dy)) in RING.iter().enumerate() {
        if img.get_signed(x as i64 + dx, y as i64 + dy) {
            code |= 1 << k;
        }
    }
    code
}

#[inline]
fn deletable(img: &BinaryMask, x: usize, y: usize, lut: &[bool; 256]) -> bool {
    let code = ring_code(img, x, y);
    code.count_ones() >= 2 && lut[code as usize]
}

fn simple_lut() -> &'static [bool; 256] {
    static LUT: OnceLock<[bool; 256]> = OnceLock::new();
    LUT.get_or_init(|| {
        let mut lut = [false; 256];
        for (code, slot) in lut.iter_mut().enumerate() {
            *slot = is_simple(code as u8);
        }
        lut
    })
}

/// A pixel is simple when its foreground neighbours form exactly one
/// 8-component and exactly one background 4-component touches it.
fn is_simple(code: u8) -> bool {
    let fg = |k: usize| code & (1 << (k % 8)) != 0;

    let mut parent: [usize; 8] = std::array::from_fn(|i| i);
    fn find(p: &mut [usize; 8], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let join = |p: &mut [usize; 8], a: usize, b: usize| {
        let (ra, rb) = (find(p, a), find(p, b));
        p[ra] = rb;
    };

    // foreground, 8-adjacency inside the ring
    for k in 0..8 {
        if fg(k) && fg(k + 1) {
            join(&mut parent, k, (k + 1) % 8);
        }
        if k % 2 == 0 && fg(k) && fg(k + 2) {
            join(&mut parent, k, (k + 2) % 8);
        }
    }
    let mut roots: Vec<usize> = (0..8).filter(|&k| fg(k)).map(|k| find(&mut parent, k)).collect();
    roots.sort_unstable();
    roots.dedup();
    if roots.len() != 1 {
        return false;
    }

    // background, 4-adjacency; only components containing a 4-neighbour count
    let mut parent: [usize; 8] = std::array::from_fn(|i| i);
    for k in 0..8 {
        if !fg(k) && !fg(k + 1) {
            join(&mut parent, k, (k + 1) % 8);
        }
    }
    let mut roots: Vec<usize> = (0..8)
        .step_by(2)
        .filter(|&k| !fg(k))
        .map(|k| find(&mut parent, k))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len() == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thin_line_is_fixed_point() {
        let m = BinaryMask::from_fn(30, 9, |x, y| y == 4 && (3..27).contains(&x));
        assert_eq!(skeletonize(&m), m);
    }

    #[test]
    fn empty_in_empty_out() {
        let m = BinaryMask::new(10, 10);
        assert!(skeletonize(&m).is_empty());
    }

    #[test]
    fn rectangle_collapses_to_midline() {
        let m = BinaryMask::from_fn(61, 31, |x, y| (10..51).contains(&x) && (10..21).contains(&y));
        let s = skeletonize(&m);
        assert!(s.count() > 20);
        assert_eq!(s.count_components_8(), 1);
        for (x, y) in s.iter_set() {
            assert!(m.get(x, y));
            assert!(y.abs_diff(15) <= 1, "pixel ({x},{y}) off midline");
        }
    }

    #[test]
    fn disk_collapses_to_center() {
        let m = BinaryMask::from_fn(41, 41, |x, y| {
            let (dx, dy) = (x as f64 - 20.0, y as f64 - 20.0);
            dx * dx + dy * dy <= 100.0
        });
        let s = skeletonize(&m);
        assert!(s.count() >= 1 && s.count() <= 5, "{} pixels", s.count());
        for (x, y) in s.iter_set() {
            assert!(x.abs_diff(20) <= 2 && y.abs_diff(20) <= 2);
        }
    }

    #[test]
    fn ring_keeps_its_hole() {
        let m = BinaryMask::from_fn(41, 41, |x, y| {
            let r2 = (x as f64 - 20.0).powi(2) + (y as f64 - 20.0).powi(2);
            (36.0..=196.0).contains(&r2)
        });
        let s = skeletonize(&m);
        assert_eq!(s.count_components_8(), 1);
        // background inside the ring survives
        assert!(!s.get(20, 20));
        let holes = s.complement();
        // outer background + enclosed hole, as 4-components
        let mut seen = vec![false; 41 * 41];
        let mut comps = 0;
        for start in 0..41 * 41 {
            if !holes.bits()[start] || seen[start] {
                continue;
            }
            comps += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % 41) as i64, (i / 41) as i64);
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    if holes.get_signed(x + dx, y + dy) {
                        let j = ((y + dy) * 41 + x + dx) as usize;
                        if !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        assert_eq!(comps, 2);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn subset_thin_and_topology(bits in proptest::collection::vec(proptest::bool::weighted(0.6), 20 * 20)) {
            let m = BinaryMask::from_bits(20, 20, bits).unwrap();
            let s = skeletonize(&m);
            for (x, y) in s.iter_set() {
                proptest::prop_assert!(m.get(x, y));
            }
            proptest::prop_assert_eq!(s.count_components_8(), m.count_components_8());
        }
    }
}
