//! Contour removal: build the inpainting region from the contour and
//! foreground masks, fill it by fast marching, and composite the result back
//! inside the foreground.
//!
//! # Fill rule
//!
//! Arrival times `T` (distance to the region boundary, in pixels) are computed
//! first with a 4-neighbour fast-marching eikonal solver; known pixels have
//! `T = 0`. Region pixels are then filled in increasing `(T, row, column)`
//! order. A pixel `p` becomes the normalized weighted sum of every already
//! known pixel `q` with `|p - q| <= radius`, using
//!
//! ```text
//! w(p, q) = 1 / (|p - q|^2 * (1 + |T(p) - T(q)|))
//! ```
//!
//! i.e. inverse-square proximity damped by the difference in boundary
//! distance. There is no gradient extrapolation term, so every filled value
//! is a convex combination of known values; the result is clamped to the
//! contributing range to keep that exact under rounding.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::raster::{distance_transform, BinaryMask, RasterImage};

pub const DEFAULT_RADIUS: f64 = 5.0;

/// `M_c ∪ (1 - M)`: contour pixels plus the whole background.
pub fn compose_inpaint_mask(contour: &BinaryMask, foreground: &BinaryMask) -> Result<BinaryMask> {
    contour.union(&foreground.complement())
}

/// `filled` inside the foreground, `original` elsewhere.
pub fn composite_foreground(
    filled: &RasterImage,
    original: &RasterImage,
    foreground: &BinaryMask,
) -> Result<RasterImage> {
    if filled.dims() != original.dims()
        || filled.channels() != original.channels()
        || filled.dims() != foreground.dims()
    {
        return Err(Error::DimensionMismatch(format!(
            "composite of {:?}x{} and {:?}x{} under a {:?} mask",
            filled.dims(),
            filled.channels(),
            original.dims(),
            original.channels(),
            foreground.dims()
        )));
    }
    let mut out = original.clone();
    for (x, y) in foreground.iter_set() {
        for c in 0..out.channels() {
            out.set(x, y, c, filled.get(x, y, c));
        }
    }
    Ok(out)
}

/// Stand-in contour detector: dark pixels of the foreground lying within
/// `band` pixels of the silhouette.
pub fn fallback_contour_mask(
    img: &RasterImage,
    foreground: &BinaryMask,
    band: f64,
    darkness: f32,
) -> Result<BinaryMask> {
    if img.dims() != foreground.dims() {
        return Err(Error::DimensionMismatch(format!(
            "image {:?} vs mask {:?}",
            img.dims(),
            foreground.dims()
        )));
    }
    if band < 1.0 {
        return Err(Error::InvalidParameter(format!("band {band} must be >= 1")));
    }
    if !(darkness > 0.0 && darkness < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "darkness {darkness} must lie in (0, 1)"
        )));
    }
    let dist = distance_transform(foreground)?;
    Ok(BinaryMask::from_fn(img.width(), img.height(), |x, y| {
        foreground.get(x, y) && dist.get(x, y) <= band && img.luminance(x, y) <= darkness
    }))
}

/// Fills every pixel of `region` from the pixels outside it; pixels outside
/// `region` are copied unchanged. For RGBA input the alpha channel is passed
/// through everywhere.
pub fn fast_marching_inpaint(img: &RasterImage, region: &BinaryMask, radius: f64) -> Result<RasterImage> {
    if img.dims() != region.dims() {
        return Err(Error::DimensionMismatch(format!(
            "image {:?} vs mask {:?}",
            img.dims(),
            region.dims()
        )));
    }
    if !(radius >= 1.0) {
        return Err(Error::InvalidParameter(format!("radius {radius} must be >= 1")));
    }
    let (w, h) = img.dims();
    if region.count() == w * h {
        return Err(Error::NoKnownPixels);
    }
    let times = arrival_times(region);
    let color_channels = if img.channels() == 4 { 3 } else { img.channels() };

    let mut order: Vec<usize> = (0..w * h).filter(|&i| region.bits()[i]).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));

    let r = radius.floor() as i64;
    let r2 = radius * radius;
    let mut known: Vec<bool> = region.bits().iter().map(|b| !b).collect();
    let mut out = img.clone();
    let mut acc = [0.0f64; 4];
    for &i in &order {
        let (px, py) = ((i % w) as i64, (i / w) as i64);
        let tp = times[i];
        let mut total = 0.0;
        let mut lo = [f32::INFINITY; 4];
        let mut hi = [f32::NEG_INFINITY; 4];
        acc.fill(0.0);
        for qy in (py - r).max(0)..=(py + r).min(h as i64 - 1) {
            for qx in (px - r).max(0)..=(px + r).min(w as i64 - 1) {
                let j = qy as usize * w + qx as usize;
                if !known[j] {
                    continue;
                }
                let d2 = ((qx - px).pow(2) + (qy - py).pow(2)) as f64;
                if d2 > r2 {
                    continue;
                }
                let wgt = 1.0 / (d2 * (1.0 + (tp - times[j]).abs()));
                total += wgt;
                for c in 0..color_channels {
                    let v = out.get(qx as usize, qy as usize, c);
                    acc[c] += wgt * v as f64;
                    lo[c] = lo[c].min(v);
                    hi[c] = hi[c].max(v);
                }
            }
        }
        // the upwind neighbour that set T(p) is known and within radius 1
        debug_assert!(total > 0.0);
        for c in 0..color_channels {
            let v = ((acc[c] / total) as f32).clamp(lo[c], hi[c]);
            out.set(px as usize, py as usize, c, v);
        }
        known[i] = true;
    }
    Ok(out)
}

#[derive(PartialEq)]
struct Front {
    t: f64,
    idx: usize,
}

impl Eq for Front {}

impl Ord for Front {
    // min-heap on (t, idx); idx is row-major so ties break by row then column
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then(other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Front {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Fast-marching distance from the region boundary, 0 outside the region.
pub(crate) fn arrival_times(region: &BinaryMask) -> Vec<f64> {
    let (w, h) = region.dims();
    let mut t = vec![f64::INFINITY; w * h];
    let mut frozen = vec![false; w * h];
    for i in 0..w * h {
        if !region.bits()[i] {
            t[i] = 0.0;
            frozen[i] = true;
        }
    }
    let neighbours = |i: usize| {
        let (x, y) = (i % w, i / w);
        let mut n = [usize::MAX; 4];
        if x > 0 {
            n[0] = i - 1;
        }
        if x + 1 < w {
            n[1] = i + 1;
        }
        if y > 0 {
            n[2] = i - w;
        }
        if y + 1 < h {
            n[3] = i + w;
        }
        n
    };

    let mut heap = BinaryHeap::new();
    let update = |i: usize, t: &mut Vec<f64>, frozen: &Vec<bool>, heap: &mut BinaryHeap<Front>| {
        let n = neighbours(i);
        let val = |j: usize| {
            if j != usize::MAX && frozen[j] {
                t[j]
            } else {
                f64::INFINITY
            }
        };
        let horizontal = val(n[0]).min(val(n[1]));
        let vertical = val(n[2]).min(val(n[3]));
        let sol = eikonal(horizontal, vertical);
        if sol < t[i] {
            t[i] = sol;
            heap.push(Front { t: sol, idx: i });
        }
    };

    for i in 0..w * h {
        if !frozen[i] && neighbours(i).iter().any(|&j| j != usize::MAX && frozen[j]) {
            update(i, &mut t, &frozen, &mut heap);
        }
    }
    while let Some(Front { t: ti, idx }) = heap.pop() {
        if frozen[idx] || ti > t[idx] {
            continue;
        }
        frozen[idx] = true;
        for j in neighbours(idx) {
            if j != usize::MAX && !frozen[j] {
                update(j, &mut t, &frozen, &mut heap);
            }
        }
    }
    t
}

/// Upwind solution of `|grad T| = 1` from the smallest known horizontal and
/// vertical neighbour times.
fn eikonal(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if !hi.is_finite() || hi - lo >= 1.0 {
        return lo + 1.0;
    }
    (lo + hi + (2.0 - (hi - lo).powi(2)).sqrt()) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r)
    }

    #[test]
    fn union_with_background() {
        let empty = BinaryMask::new(6, 6);
        let all = BinaryMask::filled(6, 6, true);
        assert!(compose_inpaint_mask(&empty, &all).unwrap().is_empty());
        assert_eq!(compose_inpaint_mask(&empty, &empty).unwrap().count(), 36);

        let mut mc = BinaryMask::new(4, 4);
        mc.set(1, 1, true);
        let mut m = BinaryMask::filled(4, 4, true);
        m.set(3, 3, false);
        let r = compose_inpaint_mask(&mc, &m).unwrap();
        let set: Vec<_> = r.iter_set().collect();
        assert_eq!(set, vec![(1, 1), (3, 3)]);
    }

    #[test]
    fn union_rejects_mismatch() {
        assert!(compose_inpaint_mask(&BinaryMask::new(3, 3), &BinaryMask::new(4, 3)).is_err());
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = RasterImage::filled(20, 16, 3, 0.37).unwrap();
        let region = disk(20, 16, 9.0, 8.0, 5.0);
        let out = fast_marching_inpaint(&img, &region, 5.0).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn equal_neighbours() {
        let mut img = RasterImage::filled(3, 3, 1, 0.2).unwrap();
        img.set(1, 1, 0, 0.9);
        let mut region = BinaryMask::new(3, 3);
        region.set(1, 1, true);
        let out = fast_marching_inpaint(&img, &region, 1.0).unwrap();
        assert_eq!(out.get(1, 1, 0), 0.2);
    }

    #[test]
    fn symmetric_stencil_averages() {
        // left/top neighbours 0, right/bottom 1, equal distance and level
        let img = RasterImage::from_fn(3, 3, 1, |x, y, _| if x + y >= 3 { 1.0 } else { 0.0 }).unwrap();
        let mut region = BinaryMask::new(3, 3);
        region.set(1, 1, true);
        let out = fast_marching_inpaint(&img, &region, 1.0).unwrap();
        assert!((out.get(1, 1, 0) - 0.5).abs() <= 1e-6);
    }

    #[test]
    fn whole_image_region_is_an_error() {
        let img = RasterImage::filled(4, 4, 1, 0.5).unwrap();
        let all = BinaryMask::filled(4, 4, true);
        assert!(matches!(
            fast_marching_inpaint(&img, &all, 3.0),
            Err(Error::NoKnownPixels)
        ));
    }

    #[test]
    fn alpha_passes_through() {
        let img = RasterImage::from_fn(10, 10, 4, |x, y, c| {
            if c == 3 {
                (x * 10 + y) as f32 / 100.0
            } else {
                x as f32 / 10.0
            }
        })
        .unwrap();
        let region = disk(10, 10, 5.0, 5.0, 2.0);
        let out = fast_marching_inpaint(&img, &region, 3.0).unwrap();
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(out.get(x, y, 3), img.get(x, y, 3));
            }
        }
    }

    #[test]
    fn arrival_times_grow_inward() {
        let region = disk(31, 31, 15.0, 15.0, 10.0);
        let t = arrival_times(&region);
        assert_eq!(t[0], 0.0);
        let center = t[15 * 31 + 15];
        assert!(center > 9.0 && center < 12.0, "{center}");
        for y in 1..30 {
            for x in 1..30 {
                let i = y * 31 + x;
                if region.get(x, y) {
                    let min_n = [i - 1, i + 1, i - 31, i + 31].iter().map(|&j| t[j]).fold(f64::INFINITY, f64::min);
                    assert!(t[i] > min_n);
                }
            }
        }
    }

    #[test]
    fn composite_selects_per_pixel() {
        let a = RasterImage::filled(6, 6, 3, 0.1).unwrap();
        let b = RasterImage::filled(6, 6, 3, 0.8).unwrap();
        assert_eq!(composite_foreground(&a, &b, &BinaryMask::filled(6, 6, true)).unwrap(), a);
        assert_eq!(composite_foreground(&a, &b, &BinaryMask::new(6, 6)).unwrap(), b);
        let checker = BinaryMask::from_fn(6, 6, |x, y| (x + y) % 2 == 0);
        let c = composite_foreground(&a, &b, &checker).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                let want = if (x + y) % 2 == 0 { 0.1 } else { 0.8 };
                assert_eq!(c.get(x, y, 1), want);
            }
        }
    }

    #[test]
    fn fallback_finds_outline() {
        let fg = disk(48, 48, 24.0, 24.0, 15.0);
        let dist = distance_transform(&fg).unwrap();
        let outline = BinaryMask::from_fn(48, 48, |x, y| fg.get(x, y) && dist.get(x, y) <= 2.0);
        let mut img = RasterImage::filled(48, 48, 3, 1.0).unwrap();
        for (x, y) in fg.iter_set() {
            let v = if outline.get(x, y) { 0.05 } else { 0.85 };
            for c in 0..3 {
                img.set(x, y, c, v);
            }
        }
        // dark interior dot far from the silhouette
        for c in 0..3 {
            img.set(24, 24, c, 0.0);
        }
        let found = fallback_contour_mask(&img, &fg, 4.0, 0.3).unwrap();
        assert_eq!(found, outline);

        let white = RasterImage::filled(48, 48, 3, 1.0).unwrap();
        assert!(fallback_contour_mask(&white, &fg, 4.0, 0.3).unwrap().is_empty());
    }

    proptest::proptest! {
        #[test]
        fn outside_exact_and_inside_bounded(
            vals in proptest::collection::vec(0.0f32..=1.0, 24 * 24),
            holes in proptest::collection::vec(proptest::bool::weighted(0.4), 24 * 24),
            radius in 1.0f64..6.0,
        ) {
            let img = RasterImage::from_vec(24, 24, 1, vals).unwrap();
            let mut region = BinaryMask::from_bits(24, 24, holes).unwrap();
            region.set(0, 0, false);
            let out = fast_marching_inpaint(&img, &region, radius).unwrap();
            let known: Vec<f32> = (0..24 * 24).filter(|&i| !region.bits()[i]).map(|i| img.data()[i]).collect();
            let lo = known.iter().cloned().fold(f32::INFINITY, f32::min);
            let hi = known.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            for i in 0..24 * 24 {
                if region.bits()[i] {
                    proptest::prop_assert!(out.data()[i] >= lo && out.data()[i] <= hi);
                } else {
                    proptest::prop_assert_eq!(out.data()[i].to_bits(), img.data()[i].to_bits());
                }
            }
            let again = fast_marching_inpaint(&img, &region, radius).unwrap();
            proptest::prop_assert_eq!(again, out);
        }

        #[test]
        fn composite_idempotent(vals in proptest::collection::vec(0.0f32..=1.0, 8 * 8 * 3), bits in proptest::collection::vec(proptest::bool::ANY, 64)) {
            let x = RasterImage::from_vec(8, 8, 3, vals).unwrap();
            let m = BinaryMask::from_bits(8, 8, bits).unwrap();
            proptest::prop_assert_eq!(composite_foreground(&x, &x, &m).unwrap(), x);
        }
    }
}
