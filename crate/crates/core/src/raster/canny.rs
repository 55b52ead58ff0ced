use serde::{Deserialize, Serialize};

use super::{BinaryMask, RasterImage};
use crate::error::{Error, Result};

/// Canny thresholds apply to gradient magnitudes normalized by the image's
/// maximum magnitude, so `low`/`high` are fractions in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CannyParams {
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            low: 0.1,
            high: 0.2,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "canny sigma {} must be >= 0",
                self.sigma
            )));
        }
        if !(self.low > 0.0 && self.low < self.high) {
            return Err(Error::InvalidParameter(format!(
                "canny thresholds need 0 < low < high, got low={} high={}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

/// Gaussian blur, Sobel gradients, non-maximum suppression and hysteresis
/// linking (8-connected). Pixels on the outermost raster ring never carry
/// an edge.
pub fn canny(gray: &RasterImage, params: &CannyParams) -> Result<BinaryMask> {
    params.validate()?;
    if gray.channels() != 1 {
        return Err(Error::InvalidParameter(format!(
            "canny expects a single-channel image, got {} channels",
            gray.channels()
        )));
    }
    let (w, h) = gray.dims();
    let src: Vec<f64> = gray.data().iter().map(|v| *v as f64).collect();
    let smooth = gaussian_blur(&src, w, h, params.sigma);

    let at = |x: i64, y: i64| -> f64 {
        let xc = x.clamp(0, w as i64 - 1) as usize;
        let yc = y.clamp(0, h as i64 - 1) as usize;
        smooth[yc * w + xc]
    };
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let mut mag = vec![0.0; w * h];
    let mut peak: f64 = 0.0;
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let sx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let sy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            gx[i] = sx / 8.0;
            gy[i] = sy / 8.0;
            mag[i] = gx[i].hypot(gy[i]);
            peak = peak.max(mag[i]);
        }
    }
    let mut edges = BinaryMask::new(w, h);
    if peak <= f64::EPSILON || w < 3 || h < 3 {
        return Ok(edges);
    }
    for m in &mut mag {
        *m /= peak;
    }

    // non-maximum suppression along the quantized gradient direction
    let mut thin = vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if m < params.low {
                continue;
            }
            let angle = gy[i].atan2(gx[i]).to_degrees();
            let a = if angle < 0.0 { angle + 180.0 } else { angle };
            let (dx, dy): (i64, i64) = if !(22.5..157.5).contains(&a) {
                (1, 0)
            } else if a < 67.5 {
                (1, 1)
            } else if a < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let fwd = mag[(y as i64 + dy) as usize * w + (x as i64 + dx) as usize];
            let bwd = mag[(y as i64 - dy) as usize * w + (x as i64 - dx) as usize];
            if m > fwd && m >= bwd {
                thin[i] = m;
            }
        }
    }

    let mut stack: Vec<usize> = (0..w * h).filter(|&i| thin[i] >= params.high).collect();
    for &i in &stack {
        edges.set(i % w, i / w, true);
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 1 || ny < 1 || nx >= w as i64 - 1 || ny >= h as i64 - 1 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if thin[j] >= params.low && !edges.get(nx as usize, ny as usize) {
                    edges.set(nx as usize, ny as usize, true);
                    stack.push(j);
                }
            }
        }
    }
    Ok(edges)
}

/// Separable Gaussian with clamped borders; `sigma == 0` is the identity.
pub(crate) fn gaussian_blur(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let xs = (x as i64 + k as i64 - radius).clamp(0, w as i64 - 1) as usize;
                acc += kv * src[y * w + xs];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let ys = (y as i64 + k as i64 - radius).clamp(0, h as i64 - 1) as usize;
                acc += kv * tmp[ys * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}
