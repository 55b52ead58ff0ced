//! Exact Euclidean distance transforms (separable lower-envelope method).

use super::{BinaryMask, DistanceField};
use crate::error::{Error, Result};

/// Exact Euclidean distance from every foreground pixel center to the nearest
/// background pixel center. Background maps to 0, a foreground pixel with a
/// background 4-neighbour maps to 1.
///
/// Pixels outside the raster count as background, so the field is finite for
/// every mask including an all-foreground one.
pub fn distance_transform(mask: &BinaryMask) -> Result<DistanceField> {
    let (w, h) = mask.dims();
    if w == 0 || h == 0 {
        return Err(Error::ZeroSize {
            width: w,
            height: h,
        });
    }
    let sq = squared_edt(w, h, |i| !mask.bits()[i], true);
    Ok(DistanceField::from_parts(
        w,
        h,
        sq.into_iter().map(f64::sqrt).collect(),
    ))
}

/// Signed distance to the mask boundary in pixels: negative inside, positive
/// outside. The zero crossing sits half-way between a foreground pixel center
/// and its background neighbour, so boundary pixels read ±0.5.
pub fn signed_distance_2d(mask: &BinaryMask) -> Result<DistanceField> {
    let (w, h) = mask.dims();
    if w == 0 || h == 0 {
        return Err(Error::ZeroSize {
            width: w,
            height: h,
        });
    }
    let fg = mask.count();
    if fg == 0 {
        return Err(Error::DegenerateMask("mask has no foreground pixel"));
    }
    if fg == w * h {
        return Err(Error::DegenerateMask("mask has no background pixel"));
    }
    let bits = mask.bits();
    let to_bg = squared_edt(w, h, |i| !bits[i], false);
    let to_fg = squared_edt(w, h, |i| bits[i], false);
    let values = (0..w * h)
        .map(|i| {
            if bits[i] {
                -(to_bg[i].sqrt() - 0.5)
            } else {
                to_fg[i].sqrt() - 0.5
            }
        })
        .collect();
    Ok(DistanceField::from_parts(w, h, values))
}

/// Squared distance from each pixel to the nearest feature pixel. With
/// `border_is_feature`, the ring of pixels just outside the raster also
/// counts as feature. Returns `inf` where no feature exists.
pub(crate) fn squared_edt(
    w: usize,
    h: usize,
    is_feature: impl Fn(usize) -> bool,
    border_is_feature: bool,
) -> Vec<f64> {
    let pad = usize::from(border_is_feature);
    let pw = w + 2 * pad;
    let ph = h + 2 * pad;
    let mut grid = vec![f64::INFINITY; pw * ph];
    for y in 0..ph {
        for x in 0..pw {
            let inside = x >= pad && y >= pad && x < w + pad && y < h + pad;
            let feature = if inside {
                is_feature((y - pad) * w + (x - pad))
            } else {
                true
            };
            if feature {
                grid[y * pw + x] = 0.0;
            }
        }
    }

    let mut env = Envelope::with_capacity(pw.max(ph));
    let mut line = vec![0.0; pw.max(ph)];
    let mut out = vec![0.0; pw.max(ph)];
    for x in 0..pw {
        for y in 0..ph {
            line[y] = grid[y * pw + x];
        }
        env.transform(&line[..ph], &mut out[..ph]);
        for y in 0..ph {
            grid[y * pw + x] = out[y];
        }
    }
    for y in 0..ph {
        let row = &mut grid[y * pw..(y + 1) * pw];
        line[..pw].copy_from_slice(row);
        env.transform(&line[..pw], &mut out[..pw]);
        row.copy_from_slice(&out[..pw]);
    }

    if pad == 0 {
        return grid;
    }
    let mut cropped = Vec::with_capacity(w * h);
    for y in 0..h {
        cropped.extend_from_slice(&grid[(y + 1) * pw + 1..(y + 1) * pw + 1 + w]);
    }
    cropped
}

/// 1D squared distance transform of a sampled function via the lower
/// envelope of parabolas rooted at the finite samples.
struct Envelope {
    roots: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            roots: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        self.roots.clear();
        self.bounds.clear();
        for q in 0..f.len() {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + (q * q) as f64;
            loop {
                let Some(&p) = self.roots.last() else {
                    self.roots.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let fp = f[p] + (p * p) as f64;
                let s = (fq - fp) / (2.0 * (q - p) as f64);
                if s <= *self.bounds.last().unwrap() {
                    self.roots.pop();
                    self.bounds.pop();
                } else {
                    self.roots.push(q);
                    self.bounds.push(s);
                    break;
                }
            }
        }
        if self.roots.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            while k + 1 < self.roots.len() && self.bounds[k + 1] < q as f64 {
                k += 1;
            }
            let p = self.roots[k];
            let d = q.abs_diff(p) as f64;
            *o = d * d + f[p];
        }
    }
}
