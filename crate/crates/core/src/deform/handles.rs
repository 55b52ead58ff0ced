use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::raster::{dilate, distance_transform, skeletonize, BinaryMask, DistanceField};
use crate::volume::FrontProjection;

/// Thresholds for handle selection, all in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandleParams {
    /// Pixels at least this far inside the silhouette are fixed.
    pub theta1: f64,
    /// Skeleton pixels at most this far inside the silhouette are thinned.
    pub theta2: f64,
    /// Skeleton pixels within this distance of the fixed region are dropped.
    pub guard: f64,
    /// Vertices within this distance of a thinning skeleton pixel move.
    pub snap: f64,
}

impl Default for HandleParams {
    fn default() -> Self {
        Self {
            theta1: 11.0,
            theta2: 6.0,
            guard: 5.0,
            snap: 2.0,
        }
    }
}

impl HandleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta2 > 0.0 && self.theta1 > self.theta2) {
            return Err(Error::InvalidParameter(format!(
                "need theta1 > theta2 > 0, got theta1={} theta2={}",
                self.theta1, self.theta2
            )));
        }
        if self.guard < 0.0 || self.snap < 0.0 {
            return Err(Error::InvalidParameter("guard and snap must be non-negative".into()));
        }
        Ok(())
    }
}

/// Intermediate masks of handle selection and the resulting vertex classes.
#[derive(Debug, Clone)]
pub struct HandleRegions {
    pub distance: DistanceField,
    pub skeleton: BinaryMask,
    /// `M ∧ D ≥ θ1`.
    pub fixed_mask: BinaryMask,
    /// `S ∧ D ≤ θ2` before removing the guard zone.
    pub skeleton_thin: BinaryMask,
    /// Thinning skeleton with pixels near the fixed region removed.
    pub skeleton_moving: BinaryMask,
    /// Vertex indices, ascending.
    pub fixed: Vec<usize>,
    pub moving: Vec<usize>,
}

/// Classifies vertices by the pixel their front projection falls in:
/// fixed inside the deep-interior region, moving near thin skeleton
/// branches, free otherwise.
pub fn select_handles(
    mesh: &TriMesh,
    mask: &BinaryMask,
    proj: &FrontProjection,
    params: &HandleParams,
) -> Result<HandleRegions> {
    params.validate()?;
    proj.validate()?;
    if mask.dims() != (proj.width, proj.height) {
        return Err(Error::DimensionMismatch(format!(
            "mask {:?} vs projection {}x{}",
            mask.dims(),
            proj.width,
            proj.height
        )));
    }
    let distance = distance_transform(mask)?;
    let skeleton = skeletonize(mask);
    let fixed_mask = distance.threshold(|d| d >= params.theta1);
    let shallow = distance.threshold(|d| d > 0.0 && d <= params.theta2);
    let skeleton_thin = skeleton.intersection(&shallow)?;
    let guard_zone = if fixed_mask.is_empty() {
        BinaryMask::new(mask.width(), mask.height())
    } else {
        dilate(&fixed_mask, params.guard)
    };
    let skeleton_moving = skeleton_thin.difference(&guard_zone)?;
    let near_moving = dilate(&skeleton_moving, params.snap);

    let mut fixed = Vec::new();
    let mut moving = Vec::new();
    for (i, v) in mesh.vertices().iter().enumerate() {
        let Some((x, y)) = proj.pixel_of(v) else {
            continue;
        };
        if fixed_mask.get(x, y) {
            fixed.push(i);
        } else if near_moving.get(x, y) {
            moving.push(i);
        }
    }
    Ok(HandleRegions {
        distance,
        skeleton,
        fixed_mask,
        skeleton_thin,
        skeleton_moving,
        fixed,
        moving,
    })
}
