//! Signed distance grids: construction from meshes, front-view cutting and
//! iso-surface extraction.

mod marching;
mod sdf;
mod tables;
pub(crate) mod tree;

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use marching::{marching_cubes, IsoSurface};
pub use sdf::{mesh_to_sdf, point_segment_distance, point_triangle_distance};
pub use tree::TriangleTree;

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::raster::{signed_distance_2d, BinaryMask};

/// Orthographic map between front-view model coordinates and pixels.
///
/// Pixel row 0 is the top of the image and corresponds to the largest model
/// `y`. Continuous pixel coordinates put integer values at pixel centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontProjection {
    /// Model units per pixel.
    pub scale: f64,
    /// Model-space `(x, y)` of the center of pixel `(0, 0)`.
    pub offset: [f64; 2],
    pub width: usize,
    pub height: usize,
}

impl FrontProjection {
    /// Image centered on the model origin, `half_width` model units from the
    /// center to the left and right image edges.
    pub fn centered(width: usize, height: usize, half_width: f64) -> Self {
        let scale = 2.0 * half_width / width as f64;
        Self {
            scale,
            offset: [
                -half_width + scale / 2.0,
                height as f64 * scale / 2.0 - scale / 2.0,
            ],
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidParameter(format!("projection scale {}", self.scale)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::ZeroSize {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    #[inline]
    pub fn to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.offset[0]) / self.scale, (self.offset[1] - y) / self.scale)
    }

    #[inline]
    pub fn to_model(&self, px: f64, py: f64) -> (f64, f64) {
        (self.offset[0] + px * self.scale, self.offset[1] - py * self.scale)
    }

    /// Pixel containing the projection of `p`, if inside the image.
    pub fn pixel_of(&self, p: &Point) -> Option<(usize, usize)> {
        let (px, py) = self.to_pixel(p.x, p.y);
        let (ix, iy) = (px.round(), py.round());
        (ix >= 0.0 && iy >= 0.0 && ix < self.width as f64 && iy < self.height as f64)
            .then_some((ix as usize, iy as usize))
    }

    /// Same model window sampled at a different resolution.
    pub fn resampled(&self, width: usize, height: usize) -> Self {
        let sx = self.width as f64 / width as f64;
        let left = self.offset[0] - self.scale / 2.0;
        let top = self.offset[1] + self.scale / 2.0;
        let scale = self.scale * sx;
        Self {
            scale,
            offset: [left + scale / 2.0, top - scale / 2.0],
            width,
            height,
        }
    }
}

/// Dense regular grid of signed distances, negative inside.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfGrid {
    dims: [usize; 3],
    origin: Point,
    spacing: f64,
    values: Vec<f32>,
}

impl SdfGrid {
    pub fn new(dims: [usize; 3], origin: Point, spacing: f64, values: Vec<f32>) -> Result<Self> {
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidParameter(format!("grid dims {dims:?} must each be >= 2")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidParameter(format!("grid spacing {spacing}")));
        }
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::DimensionMismatch(format!(
                "{} values for grid {dims:?}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite grid value".into()));
        }
        Ok(Self {
            dims,
            origin,
            spacing,
            values,
        })
    }

    /// Evaluates `f` at every voxel center, in parallel over z-slices.
    pub fn from_fn(
        dims: [usize; 3],
        origin: Point,
        spacing: f64,
        f: impl Fn(Point) -> f64 + Sync,
    ) -> Result<Self> {
        let [nx, ny, nz] = dims;
        let mut values = vec![0f32; nx * ny * nz];
        values
            .par_chunks_mut(nx * ny)
            .enumerate()
            .for_each(|(k, slice)| {
                for j in 0..ny {
                    for i in 0..nx {
                        let p = origin + spacing * nalgebra::Vector3::new(i as f64, j as f64, k as f64);
                        slice[j * nx + i] = f(p) as f32;
                    }
                }
            });
        Self::new(dims, origin, spacing, values)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    #[inline]
    pub fn position(&self, i: usize, j: usize, k: usize) -> Point {
        self.origin + self.spacing * nalgebra::Vector3::new(i as f64, j as f64, k as f64)
    }

    /// `(min, max)` of the stored values.
    pub fn value_range(&self) -> (f32, f32) {
        self.values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
    }

    /// Trilinear interpolation; positions outside the grid are clamped to it.
    pub fn sample(&self, p: &Point) -> f64 {
        let mut idx = [0usize; 3];
        let mut t = [0f64; 3];
        for a in 0..3 {
            let g = ((p[a] - self.origin[a]) / self.spacing).clamp(0.0, (self.dims[a] - 1) as f64);
            let i = (g.floor() as usize).min(self.dims[a] - 2);
            idx[a] = i;
            t[a] = g - i as f64;
        }
        let [i, j, k] = idx;
        let c = |di: usize, dj: usize, dk: usize| self.get(i + di, j + dj, k + dk) as f64;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let x00 = lerp(c(0, 0, 0), c(1, 0, 0), t[0]);
        let x10 = lerp(c(0, 1, 0), c(1, 1, 0), t[0]);
        let x01 = lerp(c(0, 0, 1), c(1, 0, 1), t[0]);
        let x11 = lerp(c(0, 1, 1), c(1, 1, 1), t[0]);
        lerp(lerp(x00, x10, t[1]), lerp(x01, x11, t[1]), t[2])
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(b"SDF1")?;
        for n in self.dims {
            let n = u32::try_from(n).map_err(|_| Error::Format("grid too large".into()))?;
            w.write_all(&n.to_le_bytes())?;
        }
        for a in 0..3 {
            w.write_all(&(self.origin[a] as f32).to_le_bytes())?;
        }
        w.write_all(&(self.spacing as f32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"SDF1" {
            return Err(Error::Format("missing SDF1 magic".into()));
        }
        let mut word = [0u8; 4];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 4]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = u32::from_le_bytes(next(&mut r)?) as usize;
        }
        let mut origin = Point::origin();
        for a in 0..3 {
            origin[a] = f32::from_le_bytes(next(&mut r)?) as f64;
        }
        let spacing = f32::from_le_bytes(next(&mut r)?) as f64;
        let n = dims
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(*d))
            .ok_or_else(|| Error::Format("grid dims overflow".into()))?;
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        if raw.len() != n * 4 {
            return Err(Error::Format(format!(
                "expected {} value bytes, found {}",
                n * 4,
                raw.len()
            )));
        }
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(dims, origin, spacing, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Intersects the solid with the extrusion of `mask` along z:
/// `max(value, s * sd2(X, Y))` where `sd2` is the mask's signed distance in
/// pixels, sampled bilinearly at the voxel's projection.
pub fn cut_sdf(grid: &SdfGrid, mask: &BinaryMask, proj: &FrontProjection) -> Result<SdfGrid> {
    proj.validate()?;
    if mask.dims() != (proj.width, proj.height) {
        return Err(Error::DimensionMismatch(format!(
            "mask {:?} vs projection {}x{}",
            mask.dims(),
            proj.width,
            proj.height
        )));
    }
    let sd = signed_distance_2d(mask)?;
    let [nx, ny, _] = grid.dims;
    // The 2D term only depends on (i, j).
    let footprint: Vec<f32> = (0..nx * ny)
        .into_par_iter()
        .map(|ij| {
            let p = grid.position(ij % nx, ij / nx, 0);
            let (px, py) = proj.to_pixel(p.x, p.y);
            (proj.scale * sd.sample(px, py)) as f32
        })
        .collect();
    let mut values = grid.values.clone();
    values.par_chunks_mut(nx * ny).for_each(|slice| {
        for (v, c) in slice.iter_mut().zip(&footprint) {
            *v = v.max(*c);
        }
    });
    Ok(SdfGrid { values, ..grid.clone() })
}
