//! Orthographic software rendering and per-frame guidance layers.

mod raster;

use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use raster::{rasterize_faces, Coverage, EMPTY};

use crate::error::{Error, Result};
use crate::mesh::{Aabb, Point, TriMesh};
use crate::raster::io::{write_image, write_image16, write_mask};
use crate::raster::{canny, dilate, BinaryMask, CannyParams, RasterImage};
use crate::volume::FrontProjection;

/// Background value of the color layer.
const BACKGROUND: f32 = 1.0;
/// Covered depth maps onto `[NEAR_FLOOR, 1]` so the farthest surface still
/// differs from the background (0).
const NEAR_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum View {
    /// Looks along -z; model +x is image right.
    Front,
    /// Looks along +z; the image is the front image mirrored left-right.
    Back,
    /// Front view after rotating the model about its center by `yaw`
    /// degrees around +y, then `pitch` degrees around +x.
    Free { yaw: f64, pitch: f64 },
}

impl std::str::FromStr for View {
    type Err = Error;

    /// `front`, `back` or `free:<yaw>,<pitch>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "front" => Ok(View::Front),
            "back" => Ok(View::Back),
            _ => {
                let angles = s
                    .strip_prefix("free:")
                    .and_then(|r| r.split_once(','))
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
                match angles {
                    Some((yaw, pitch)) => Ok(View::Free { yaw, pitch }),
                    None => Err(Error::InvalidParameter(format!(
                        "view `{s}` (expected front, back or free:<yaw>,<pitch>)"
                    ))),
                }
            }
        }
    }
}

/// Orthographic camera: a view direction plus the front-view pixel map
/// applied after the view rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub view: View,
    pub proj: FrontProjection,
    /// Pivot of free-view rotations.
    pub center: [f64; 3],
}

impl Camera {
    pub fn new(view: View, proj: FrontProjection) -> Self {
        Self {
            view,
            proj,
            center: [0.0; 3],
        }
    }

    pub fn front(proj: FrontProjection) -> Self {
        Self::new(View::Front, proj)
    }

    pub fn back(proj: FrontProjection) -> Self {
        Self::new(View::Back, proj)
    }

    /// Uniform scale fitting the (rotated) box into the frame, leaving
    /// `margin` (fraction of each side) free.
    pub fn fit(bounds: &Aabb, view: View, width: usize, height: usize, margin: f64) -> Self {
        let c = bounds.center();
        let mut cam = Self {
            view,
            proj: FrontProjection::centered(width, height, 1.0),
            center: [c.x, c.y, c.z],
        };
        let corners = (0..8).map(|i| {
            Point::new(
                if i & 1 == 0 { bounds.min.x } else { bounds.max.x },
                if i & 2 == 0 { bounds.min.y } else { bounds.max.y },
                if i & 4 == 0 { bounds.min.z } else { bounds.max.z },
            )
        });
        let rotated: Vec<Point> = corners.map(|p| cam.rotate(&p)).collect();
        let b = Aabb::from_points(&rotated).expect("eight corners");
        let usable = (1.0 - 2.0 * margin.clamp(0.0, 0.45)).max(1e-3);
        let e = b.extent();
        let mut scale = (e.x / (width as f64 * usable)).max(e.y / (height as f64 * usable));
        if !(scale > 0.0 && scale.is_finite()) {
            scale = 1.0;
        }
        let m = b.center();
        cam.proj = FrontProjection {
            scale,
            offset: [
                m.x - scale * (width as f64 - 1.0) / 2.0,
                m.y + scale * (height as f64 - 1.0) / 2.0,
            ],
            width,
            height,
        };
        cam
    }

    pub fn width(&self) -> usize {
        self.proj.width
    }

    pub fn height(&self) -> usize {
        self.proj.height
    }

    fn rotation(&self) -> Option<Rotation3<f64>> {
        match self.view {
            View::Free { yaw, pitch } => Some(
                Rotation3::from_axis_angle(&Vector3::x_axis(), pitch.to_radians())
                    * Rotation3::from_axis_angle(&Vector3::y_axis(), yaw.to_radians()),
            ),
            _ => None,
        }
    }

    fn rotate(&self, p: &Point) -> Point {
        match self.rotation() {
            Some(r) => {
                let c = Point::from(self.center);
                c + r * (p - c)
            }
            None => *p,
        }
    }

    /// `[px, py, depth]`: continuous pixel coordinates and distance along the
    /// view direction (smaller is nearer).
    pub fn project(&self, p: &Point) -> [f64; 3] {
        match self.view {
            View::Back => {
                let (px, py) = self.proj.to_pixel(p.x, p.y);
                [self.proj.width as f64 - 1.0 - px, py, p.z]
            }
            _ => {
                let q = self.rotate(p);
                let (px, py) = self.proj.to_pixel(q.x, q.y);
                [px, py, -q.z]
            }
        }
    }

    /// Same view at another resolution (same model window).
    pub fn resampled(&self, width: usize, height: usize) -> Self {
        Self {
            proj: self.proj.resampled(width, height),
            ..*self
        }
    }
}

/// Coverage of a mesh under a camera.
pub fn cover(mesh: &TriMesh, camera: &Camera) -> Coverage {
    let screen: Vec<[f64; 3]> = mesh.vertices().par_iter().map(|p| camera.project(p)).collect();
    rasterize_faces(camera.width(), camera.height(), &screen, mesh.faces())
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub color: RasterImage,
    pub mask: BinaryMask,
    /// View depth per pixel (smaller is nearer), infinite where uncovered.
    pub depth: Vec<f64>,
    pub coverage: Coverage,
}

impl Frame {
    /// Single-channel depth: background 0, covered pixels linear in depth
    /// from `NEAR_FLOOR` (farthest covered) to 1 (nearest).
    pub fn normalized_depth(&self) -> RasterImage {
        let covered = self.depth.iter().filter(|d| d.is_finite());
        let (lo, hi) = covered.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        let range = hi - lo;
        let data = self
            .depth
            .iter()
            .map(|&d| {
                if !d.is_finite() {
                    0.0
                } else if range > 0.0 {
                    (1.0 - (1.0 - NEAR_FLOOR) * (d - lo) / range) as f32
                } else {
                    1.0
                }
            })
            .collect();
        RasterImage::from_vec(self.mask.width(), self.mask.height(), 1, data).expect("frame dimensions")
    }
}

/// Z-buffered rasterization with barycentric interpolation of vertex colors
/// (mid grey when the mesh has none). No lighting.
pub fn rasterize(mesh: &TriMesh, camera: &Camera) -> Result<Frame> {
    camera.proj.validate()?;
    let cov = cover(mesh, camera);
    let (w, h) = (camera.width(), camera.height());
    let colors = mesh.colors();
    let color = RasterImage::from_fn(w, h, 3, |x, y, c| {
        let i = y * w + x;
        let f = cov.face[i];
        if f == EMPTY {
            return BACKGROUND;
        }
        match colors {
            Some(col) => {
                let t = mesh.faces()[f as usize];
                let b = cov.bary[i];
                (0..3).map(|k| b[k] as f32 * col[t[k]][c]).sum()
            }
            None => 0.5,
        }
    })?;
    let mask = BinaryMask::from_bits(w, h, cov.face.iter().map(|f| *f != EMPTY).collect())?;
    Ok(Frame {
        color,
        mask,
        depth: cov.depth.clone(),
        coverage: cov,
    })
}

/// Stores each vertex's front-view pixel position normalized by the bounding
/// box of all projected vertices, so `(0, 0)` is the top-left of the box.
pub fn attach_rest_coordinates(mesh: &TriMesh, proj: &FrontProjection) -> Result<TriMesh> {
    let px: Vec<(f64, f64)> = mesh.vertices().iter().map(|v| proj.to_pixel(v.x, v.y)).collect();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &px {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let norm = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    let coords = px.iter().map(|&(x, y)| [norm(x, x0, x1), norm(y, y0, y1)]).collect();
    let mut out = mesh.clone();
    out.set_rest_coords(coords)?;
    Ok(out)
}

/// Per-frame layers for downstream stylization. All share one resolution.
#[derive(Debug, Clone)]
pub struct GuidanceFrame {
    pub color: RasterImage,
    pub mask: BinaryMask,
    /// Two channels, zero outside the mask.
    pub pos: RasterImage,
    pub edge: BinaryMask,
    pub depth: RasterImage,
}

impl GuidanceFrame {
    /// Writes `color.png` (RGB8), `mask.png` (L8), `pos.png` (LA16),
    /// `edge.png` (L8) and `depth.png` (L16) into `dir`, returning the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let p = |n: &str| dir.join(n);
        write_image(p("color.png"), &self.color)?;
        write_mask(p("mask.png"), &self.mask)?;
        write_image16(p("pos.png"), &self.pos)?;
        write_mask(p("edge.png"), &self.edge)?;
        write_image16(p("depth.png"), &self.depth)?;
        Ok(["color.png", "mask.png", "pos.png", "edge.png", "depth.png"]
            .iter()
            .map(|n| p(n))
            .collect())
    }
}

/// Renders color, mask and depth, rasterizes the rest-coordinate attribute,
/// and takes Canny edges of the normalized depth near the foreground.
pub fn guidance_channels(mesh: &TriMesh, camera: &Camera, params: &CannyParams) -> Result<GuidanceFrame> {
    params.validate()?;
    let rest = mesh
        .rest_coords()
        .ok_or_else(|| Error::InvalidMesh("rest coordinates are not attached".into()))?;
    let frame = rasterize(mesh, camera)?;
    let (w, h) = (camera.width(), camera.height());
    let cov = &frame.coverage;
    let pos = RasterImage::from_fn(w, h, 2, |x, y, c| {
        let i = y * w + x;
        let f = cov.face[i];
        if f == EMPTY {
            return 0.0;
        }
        let t = mesh.faces()[f as usize];
        let b = cov.bary[i];
        (0..3).map(|k| b[k] * rest[t[k]][c]).sum::<f64>() as f32
    })?;
    let depth = frame.normalized_depth();
    let edge = canny(&depth, params)?.intersection(&dilate(&frame.mask, 1.0))?;
    Ok(GuidanceFrame {
        color: frame.color,
        mask: frame.mask,
        pos,
        edge,
        depth,
    })
}
