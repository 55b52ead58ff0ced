//! Stage bodies shared by the subcommands and the pipeline.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use sketchrig_core::deform::{interior_region, laplacian_smooth, thin_limbs, HandleParams, ThinResult};
use sketchrig_core::inpaint::{compose_inpaint_mask, composite_foreground, fallback_contour_mask, fast_marching_inpaint};
use sketchrig_core::raster::{distance_transform, BinaryMask, CannyParams, RasterImage};
use sketchrig_core::render::{attach_rest_coordinates, guidance_channels, Camera, View};
use sketchrig_core::rig::{
    apply_pose_lbs, compute_skin_weights, embed_skeleton, retarget, KeypointSet, MotionClip, Skeleton, SkinWeights,
};
use sketchrig_core::texture::{backproject_colors, diffuse_hole_colors};
use sketchrig_core::volume::{marching_cubes, FrontProjection, SdfGrid};
use sketchrig_core::TriMesh;

use crate::config::{InpaintConfig, SkinConfig, SmoothConfig};

/// Removes outline strokes inside the foreground and fills them from the
/// interior. Without a contour mask, dark pixels near the silhouette are
/// taken as the outline.
pub fn inpaint_contour(
    drawing: &RasterImage,
    mask: &BinaryMask,
    contour: Option<&BinaryMask>,
    cfg: &InpaintConfig,
) -> Result<RasterImage> {
    let contour = match contour {
        Some(c) => c.clone(),
        None => fallback_contour_mask(drawing, mask, cfg.band, cfg.darkness)?,
    };
    let region = compose_inpaint_mask(&contour, mask)?;
    let filled = fast_marching_inpaint(drawing, &region, cfg.radius)?;
    Ok(composite_foreground(&filled, drawing, mask)?)
}

/// Zero level set as a mesh without unreferenced vertices.
pub fn extract(grid: &SdfGrid) -> Result<TriMesh> {
    let iso = marching_cubes(grid, 0.0);
    if !iso.has_surface {
        bail!("the grid has no zero crossing");
    }
    Ok(iso.mesh.compact().0)
}

pub fn thin(mesh: &TriMesh, mask: &BinaryMask, proj: &FrontProjection, params: &HandleParams) -> Result<ThinResult> {
    Ok(thin_limbs(mesh, mask, proj, params)?)
}

/// Smoothing limited to vertices well inside the silhouette.
pub fn smooth(mesh: &TriMesh, mask: &BinaryMask, proj: &FrontProjection, cfg: &SmoothConfig) -> Result<TriMesh> {
    let d = distance_transform(mask)?;
    let region = interior_region(mesh, &d, proj, cfg.guard);
    Ok(laplacian_smooth(mesh, cfg.iterations, cfg.strength, Some(&region))?)
}

#[derive(Debug, Clone)]
pub struct Baked {
    pub mesh: TriMesh,
    pub uncolored: usize,
    pub sweeps: usize,
}

/// Back-projection followed by hole diffusion. The back image defaults to
/// the mirrored front image.
pub fn bake(mesh: &TriMesh, front: &RasterImage, back: Option<&RasterImage>, proj: &FrontProjection) -> Result<Baked> {
    let mirrored;
    let back = match back {
        Some(b) => b,
        None => {
            mirrored = front.flip_horizontal();
            &mirrored
        }
    };
    let bp = backproject_colors(mesh, front, back, proj)?;
    let (mesh, sweeps) = diffuse_hole_colors(&bp.mesh, &bp.colored)?;
    Ok(Baked {
        mesh,
        uncolored: bp.uncolored.len(),
        sweeps,
    })
}

pub fn rig(mesh: &TriMesh, kp: &KeypointSet, proj: &FrontProjection, cfg: &SkinConfig) -> Result<(Skeleton, SkinWeights)> {
    let skeleton = embed_skeleton(mesh, kp, proj)?;
    let weights = compute_skin_weights(mesh, &skeleton, cfg.power, cfg.max_bones)?;
    Ok((skeleton, weights))
}

/// Retargets with an explicit name map, or by matching joint names.
pub fn retarget_clip(
    clip: &MotionClip,
    source: &Skeleton,
    target: &Skeleton,
    name_map: Option<&BTreeMap<String, String>>,
) -> Result<MotionClip> {
    let by_name: BTreeMap<String, String>;
    let map = match name_map {
        Some(m) => m,
        None => {
            by_name = target
                .joints()
                .iter()
                .filter(|j| source.index_of(&j.name).is_some())
                .map(|j| (j.name.clone(), j.name.clone()))
                .collect();
            &by_name
        }
    };
    Ok(retarget(clip, source, target, map)?)
}

/// Camera for a render of `resolution` pixels square over the drawing's
/// model window; free views rotate about the mesh center.
pub fn camera(view: View, resolution: usize, half_width: f64, mesh: &TriMesh) -> Camera {
    let mut cam = Camera::new(view, FrontProjection::centered(resolution, resolution, half_width));
    if let Some(b) = mesh.aabb() {
        let c = b.center();
        cam.center = [c.x, c.y, c.z];
    }
    cam
}

/// Poses the rest mesh for every frame in `frames` and writes its guidance
/// layers to `out_dir/NNNN/`. Returns the written files in frame order.
#[allow(clippy::too_many_arguments)]
pub fn guidance(
    rest: &TriMesh,
    drawing_proj: &FrontProjection,
    skeleton: &Skeleton,
    weights: &SkinWeights,
    clip: &MotionClip,
    frames: Range<usize>,
    camera: &Camera,
    canny: &CannyParams,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if frames.end > clip.len() || frames.start > frames.end {
        bail!("frames {}..{} outside the clip's {} frames", frames.start, frames.end, clip.len());
    }
    let rest = attach_rest_coordinates(rest, drawing_proj)?;
    let written: Vec<Vec<PathBuf>> = frames
        .into_par_iter()
        .map(|f| -> Result<Vec<PathBuf>> {
            let posed = apply_pose_lbs(&rest, skeleton, weights, &clip.frames[f])?;
            let g = guidance_channels(&posed, camera, canny)?;
            g.write(&out_dir.join(format!("{f:04}"))).with_context(|| format!("frame {f}"))
        })
        .collect::<Result<_>>()?;
    Ok(written.into_iter().flatten().collect())
}

/// Parses `a..b`.
pub fn parse_range(s: &str) -> Result<Range<usize>> {
    let (a, b) = s.split_once("..").context("frame range must look like 0..30")?;
    Ok(a.trim().parse()?..b.trim().parse()?)
}
