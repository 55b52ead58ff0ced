//! Inputs shared by the kernel benchmarks.

use sketchrig_core::deform::HandleSet;
use sketchrig_core::raster::{BinaryMask, RasterImage};
use sketchrig_core::volume::SdfGrid;
use sketchrig_core::{Point, TriMesh, Vec3};

/// Analytic sphere on an `n³` grid spanning `[-1, 1]³`.
pub fn sphere_grid(n: usize, radius: f64) -> SdfGrid {
    let spacing = 2.0 / (n - 1) as f64;
    SdfGrid::from_fn([n; 3], Point::new(-1.0, -1.0, -1.0), spacing, |p| p.coords.norm() - radius)
        .expect("valid grid")
}

/// Disk plus a thin bar, so skeletons and distance maps have some structure.
pub fn blob_mask(size: usize) -> BinaryMask {
    let c = size as f64 / 2.0;
    BinaryMask::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as f64 - c, y as f64 - c);
        dx * dx + dy * dy <= (0.3 * size as f64).powi(2) || (dy.abs() < 0.03 * size as f64 && dx.abs() < 0.45 * size as f64)
    })
}

/// Smooth three-channel gradient.
pub fn gradient_image(size: usize) -> RasterImage {
    RasterImage::from_fn(size, size, 3, |x, y, c| ((x + 2 * y + 37 * c) % size) as f32 / size as f32)
        .expect("valid image")
}

/// Bottom cap fixed, top cap lifted.
pub fn cap_handles(mesh: &TriMesh) -> HandleSet {
    let mut h = HandleSet::default();
    for (i, v) in mesh.vertices().iter().enumerate() {
        if v.z < -0.6 {
            h.fixed.push(i);
        } else if v.z > 0.6 {
            h.moving.push((i, Vec3::new(0.0, 0.0, 0.2)));
        }
    }
    h
}
