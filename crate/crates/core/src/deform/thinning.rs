use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec3};
use crate::raster::DistanceField;
use crate::volume::{FrontProjection, TriangleTree};

/// Vertices whose projections fall within this many pixels are averaged
/// when the view ray has an odd number of hits.
const FALLBACK_RADIUS_PX: f64 = 2.0;

#[derive(Debug, Clone, Default)]
pub struct Thinning {
    /// `(vertex, displacement)`, displacement along z only.
    pub moving: Vec<(usize, Vec3)>,
    /// Moving candidates whose view ray missed the mesh.
    pub demoted: Vec<usize>,
    /// Candidates whose mid-depth came from the odd-hit fallback.
    pub odd_hits: usize,
}

/// Mid-depth of the surface along the view ray through pixel `(px, py)`:
/// the midpoint of the first and last hit, or `None` on a miss. Odd hit
/// counts fall back to the mean z of vertices projecting nearby.
pub fn mid_depth(
    tree: &TriangleTree,
    mesh: &TriMesh,
    proj: &FrontProjection,
    px: f64,
    py: f64,
) -> Option<(f64, bool)> {
    let (x, y) = proj.to_model(px, py);
    let hits = tree.vertical_hits(x, y);
    let (first, last) = (hits.first()?, hits.last()?);
    if hits.len() % 2 == 0 {
        return Some(((first.z + last.z) / 2.0, false));
    }
    let r = FALLBACK_RADIUS_PX * proj.scale;
    let (sum, n) = mesh
        .vertices()
        .iter()
        .filter(|v| (v.x - x).powi(2) + (v.y - y).powi(2) <= r * r)
        .fold((0.0, 0usize), |(s, n), v| (s + v.z, n + 1));
    if n == 0 {
        return Some(((first.z + last.z) / 2.0, true));
    }
    Some((sum / n as f64, true))
}

/// Moves each candidate vertex toward the local mid-depth until its distance
/// from it equals the half-thickness `s * D` implied by the drawing; never
/// moves a vertex away from the mid-depth.
pub fn thinning_displacements(
    mesh: &TriMesh,
    moving: &[usize],
    distance: &DistanceField,
    proj: &FrontProjection,
) -> Result<Thinning> {
    if (distance.width(), distance.height()) != (proj.width, proj.height) {
        return Err(Error::DimensionMismatch(format!(
            "distance map {}x{} vs projection {}x{}",
            distance.width(),
            distance.height(),
            proj.width,
            proj.height
        )));
    }
    let tree = TriangleTree::new(mesh).ok_or(Error::EmptyMesh)?;
    let mut out = Thinning::default();
    for &i in moving {
        let v = mesh.vertices()[i];
        let Some((px, py)) = proj.pixel_of(&v) else {
            out.demoted.push(i);
            continue;
        };
        let Some((zc, odd)) = mid_depth(&tree, mesh, proj, px as f64, py as f64) else {
            out.demoted.push(i);
            continue;
        };
        out.odd_hits += odd as usize;
        let t = proj.scale * distance.get(px, py);
        out.moving.push((i, Vec3::new(0.0, 0.0, thinning_offset(v.z, zc, t))));
    }
    Ok(out)
}

/// `sign(zc - z) * max(0, |z - zc| - t)`.
#[inline]
pub fn thinning_offset(z: f64, zc: f64, t: f64) -> f64 {
    let excess = ((z - zc).abs() - t).max(0.0);
    if zc >= z {
        excess
    } else {
        -excess
    }
}
