use super::biharmonic::{biharmonic_displacements, HandleSet};
use super::handles::{select_handles, HandleParams, HandleRegions};
use super::thinning::thinning_displacements;
use crate::error::Result;
use crate::mesh::TriMesh;
use crate::raster::{BinaryMask, DistanceField};
use crate::volume::FrontProjection;

#[derive(Debug, Clone)]
pub struct ThinResult {
    pub mesh: TriMesh,
    pub regions: HandleRegions,
    /// Moving handles that received a displacement.
    pub moved: usize,
    pub demoted: usize,
    pub residual: f64,
}

/// Handle selection, mid-depth targets and the bi-harmonic solve in one
/// step. Displacements are along z only, so the front silhouette is kept.
pub fn thin_limbs(mesh: &TriMesh, mask: &BinaryMask, proj: &FrontProjection, params: &HandleParams) -> Result<ThinResult> {
    let regions = select_handles(mesh, mask, proj, params)?;
    let th = thinning_displacements(mesh, &regions.moving, &regions.distance, proj)?;
    let handles = HandleSet {
        fixed: regions.fixed.clone(),
        moving: th.moving.clone(),
    };
    let sol = biharmonic_displacements(mesh, &handles)?;
    let positions = mesh
        .vertices()
        .iter()
        .zip(&sol.displacements)
        .map(|(v, d)| v + d)
        .collect();
    Ok(ThinResult {
        mesh: mesh.with_positions(positions)?,
        moved: th.moving.len(),
        demoted: th.demoted.len(),
        residual: sol.residual,
        regions,
    })
}

/// Vertices projecting farther than `guard` pixels inside the silhouette;
/// smoothing restricted to these leaves the outline alone.
pub fn interior_region(mesh: &TriMesh, distance: &DistanceField, proj: &FrontProjection, guard: f64) -> Vec<bool> {
    mesh.vertices()
        .iter()
        .map(|v| proj.pixel_of(v).is_some_and(|(x, y)| distance.get(x, y) > guard))
        .collect()
}
