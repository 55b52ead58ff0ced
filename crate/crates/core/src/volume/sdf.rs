use rayon::prelude::*;

use super::tree::TriangleTree;
use super::SdfGrid;
use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};

/// Closest point of triangle `t` to `p` (Voronoi-region walk).
pub(crate) fn closest_point_on_triangle(p: &Point, t: &[Point; 3]) -> Point {
    let (a, b, c) = (t[0], t[1], t[2]);
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

pub fn point_triangle_distance(p: &Point, t: &[Point; 3]) -> f64 {
    (closest_point_on_triangle(p, t) - p).norm()
}

pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * t - p).norm()
}

/// Samples the signed distance to `mesh` on a `dims` grid whose bounds are
/// the mesh bounding box grown by `padding` voxels on every side (uniform
/// spacing set by the tightest axis, grid centered on the box).
///
/// Magnitudes are exact distances to the nearest triangle. The sign comes
/// from the generalized winding number (inside when above one half); a voxel
/// whose row predecessor is farther from the surface than one voxel step
/// inherits the predecessor's sign, since the segment between them cannot
/// cross the surface.
pub fn mesh_to_sdf(mesh: &TriMesh, dims: [usize; 3], padding: usize) -> Result<SdfGrid> {
    let tree = TriangleTree::new(mesh).ok_or(Error::EmptyMesh)?;
    if dims.iter().any(|&n| n < 8) {
        return Err(Error::InvalidParameter(format!("grid dims {dims:?} must each be >= 8")));
    }
    let bounds = tree.bounds();
    let ext = bounds.extent();
    let mut spacing: f64 = 0.0;
    for a in 0..3 {
        let cells = dims[a] as i64 - 1 - 2 * padding as i64;
        if cells < 1 {
            return Err(Error::InvalidParameter(format!(
                "padding {padding} leaves no interior cells on a {}-voxel axis",
                dims[a]
            )));
        }
        spacing = spacing.max(ext[a] / cells as f64);
    }
    if spacing <= 0.0 {
        return Err(Error::InvalidMesh("mesh has zero extent".into()));
    }
    let center = bounds.center();
    let origin = Point::new(
        center.x - spacing * (dims[0] - 1) as f64 / 2.0,
        center.y - spacing * (dims[1] - 1) as f64 / 2.0,
        center.z - spacing * (dims[2] - 1) as f64 / 2.0,
    );
    let [nx, ny, nz] = dims;
    let mut values = vec![0f32; nx * ny * nz];
    values
        .par_chunks_mut(nx)
        .enumerate()
        .for_each(|(row, out)| {
            let (j, k) = (row % ny, row / ny);
            let mut prev: Option<(f64, bool)> = None;
            for (i, v) in out.iter_mut().enumerate() {
                let q = origin + spacing * nalgebra::Vector3::new(i as f64, j as f64, k as f64);
                let bound = prev.map_or(f64::INFINITY, |(d, _)| (d + spacing) * (1.0 + 1e-9) + 1e-12);
                let d = tree
                    .nearest(&q, bound)
                    .or_else(|| tree.nearest(&q, f64::INFINITY))
                    .map(|(d, _, _)| d)
                    .expect("non-empty tree");
                let inside = match prev {
                    Some((pd, ps)) if spacing < pd * (1.0 - 1e-9) => ps,
                    _ => tree.winding_number(&q) > 0.5,
                };
                prev = Some((d, inside));
                *v = if inside { -d } else { d } as f32;
            }
        });
    SdfGrid::new(dims, origin, spacing, values)
}
