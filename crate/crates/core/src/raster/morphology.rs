//! Binary dilation and erosion by a Euclidean disk, computed through exact
//! distance transforms so the cost does not depend on the radius.

use super::distance::squared_edt;
use super::BinaryMask;

/// Pixels within Euclidean distance `radius` of a foreground pixel.
pub fn dilate(mask: &BinaryMask, radius: f64) -> BinaryMask {
    if radius <= 0.0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let bits = mask.bits();
    let sq = squared_edt(w, h, |i| bits[i], false);
    let r2 = radius * radius;
    BinaryMask::from_bits(w, h, sq.iter().map(|d| *d <= r2).collect()).unwrap()
}

/// Pixels whose whole disk of `radius` lies in the mask. Pixels outside the
/// raster do not erode.
pub fn erode(mask: &BinaryMask, radius: f64) -> BinaryMask {
    if radius <= 0.0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let bits = mask.bits();
    let sq = squared_edt(w, h, |i| !bits[i], false);
    let r2 = radius * radius;
    BinaryMask::from_bits(w, h, sq.iter().map(|d| *d > r2).collect()).unwrap()
}
