//! Synthetic test subjects: a capsule biped with its drawing, keypoints and
//! a waving motion clip.
//!
//! Limbs are drawn thinner than the 3D capsules they come from, so after
//! cutting they are deeper than they are wide, which is what thinning
//! corrects.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{UnitQuaternion, Vector3};

use crate::error::Result;
use crate::mesh::{Aabb, Color, Point, TriMesh, Vec3};
use crate::raster::{distance_transform, BinaryMask, RasterImage};
use crate::rig::{serialize_bvh, Joint, KeypointSet, MotionClip, Pose, Skeleton};
use crate::volume::{marching_cubes, FrontProjection, SdfGrid};

/// A segment with a drawn (2D) radius and a solid (3D) radius.
#[derive(Debug, Clone, Copy)]
pub struct Capsule {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub drawn: f64,
    pub solid: f64,
    pub color: Color,
}

impl Capsule {
    fn axis_distance(&self, x: f64, y: f64, z: f64) -> f64 {
        let (dx, dy) = (self.b[0] - self.a[0], self.b[1] - self.a[1]);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((x - self.a[0]) * dx + (y - self.a[1]) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (px, py) = (self.a[0] + t * dx, self.a[1] + t * dy);
        ((x - px).powi(2) + (y - py).powi(2) + z * z).sqrt()
    }
}

pub const DRAWING_SIZE: usize = 512;
/// Model half-width of the drawing.
pub const HALF_WIDTH: f64 = 1.0;
/// Width of the dark outline band, pixels.
pub const OUTLINE_PX: f64 = 3.0;
pub const LIMB_DRAWN: f64 = 0.019;
pub const LIMB_SOLID: f64 = 0.05;
pub const WAVE_FRAMES: usize = 30;

const SKIN: Color = [0.95, 0.8, 0.65];
const SHIRT: Color = [0.25, 0.4, 0.8];
const TROUSERS: Color = [0.3, 0.3, 0.35];
const INK: Color = [0.1, 0.1, 0.1];

/// Joint layout in model units (character's left is +x).
pub const GROIN: [f64; 2] = [0.0, -0.12];
pub const CHIN: [f64; 2] = [0.0, 0.41];
pub const HEAD: [f64; 2] = [0.0, 0.53];
pub const SHOULDER: [f64; 2] = [0.14, 0.32];
pub const ELBOW: [f64; 2] = [0.42, 0.22];
pub const WRIST: [f64; 2] = [0.66, 0.12];
pub const HIP: [f64; 2] = [0.08, -0.15];
pub const KNEE: [f64; 2] = [0.13, -0.5];
pub const ANKLE: [f64; 2] = [0.16, -0.85];

fn mirror(p: [f64; 2]) -> [f64; 2] {
    [-p[0], p[1]]
}

/// Parts in drawing priority order (earlier parts paint over later ones).
pub fn biped_parts() -> Vec<Capsule> {
    let limb = |a, b, color| Capsule {
        a,
        b,
        drawn: LIMB_DRAWN,
        solid: LIMB_SOLID,
        color,
    };
    vec![
        Capsule {
            a: HEAD,
            b: HEAD,
            drawn: 0.13,
            solid: 0.15,
            color: SKIN,
        },
        Capsule {
            a: GROIN,
            b: [0.0, 0.3],
            drawn: 0.16,
            solid: 0.18,
            color: SHIRT,
        },
        limb(SHOULDER, ELBOW, SHIRT),
        limb(ELBOW, WRIST, SKIN),
        limb(mirror(SHOULDER), mirror(ELBOW), SHIRT),
        limb(mirror(ELBOW), mirror(WRIST), SKIN),
        limb(HIP, KNEE, TROUSERS),
        limb(KNEE, ANKLE, TROUSERS),
        limb(mirror(HIP), mirror(KNEE), TROUSERS),
        limb(mirror(KNEE), mirror(ANKLE), TROUSERS),
    ]
}

/// Everything the pipeline needs for the biped.
#[derive(Debug, Clone)]
pub struct Biped {
    pub proj: FrontProjection,
    pub mask: BinaryMask,
    /// Colored drawing with a dark outline band.
    pub drawing: RasterImage,
    /// The outline band.
    pub contour: BinaryMask,
    pub keypoints: KeypointSet,
    /// Union of the solid capsules, polygonized.
    pub coarse: TriMesh,
    pub motion: String,
}

/// Builds the biped. `mesh_resolution` is the sample count along the
/// longest side of the polygonization grid.
pub fn biped(mesh_resolution: usize) -> Result<Biped> {
    let parts = biped_parts();
    let proj = FrontProjection::centered(DRAWING_SIZE, DRAWING_SIZE, HALF_WIDTH);
    let n = DRAWING_SIZE;
    let owner = |px: usize, py: usize| -> Option<usize> {
        let (x, y) = proj.to_model(px as f64, py as f64);
        parts.iter().position(|c| c.axis_distance(x, y, 0.0) <= c.drawn)
    };
    let owners: Vec<Option<usize>> = (0..n * n).map(|i| owner(i % n, i / n)).collect();
    let mask = BinaryMask::from_fn(n, n, |x, y| owners[y * n + x].is_some());
    let d = distance_transform(&mask)?;
    let contour = d.threshold(|v| v > 0.0 && v <= OUTLINE_PX);
    let drawing = RasterImage::from_fn(n, n, 3, |x, y, c| match owners[y * n + x] {
        None => 1.0,
        Some(_) if contour.get(x, y) => INK[c],
        Some(p) => parts[p].color[c],
    })?;

    let px = |p: [f64; 2]| {
        let (x, y) = proj.to_pixel(p[0], p[1]);
        [x, y]
    };
    let keypoints = KeypointSet {
        image_size: [n, n],
        keypoints: [
            ("chin", CHIN),
            ("groin", GROIN),
            ("left_elbow", ELBOW),
            ("left_wrist", WRIST),
            ("left_knee", KNEE),
            ("right_elbow", mirror(ELBOW)),
            ("right_wrist", mirror(WRIST)),
            ("right_knee", mirror(KNEE)),
        ]
        .iter()
        .map(|(name, p)| (name.to_string(), px(*p)))
        .collect(),
    };

    let coarse = solid_mesh(&parts, mesh_resolution)?;
    let (skeleton, clip) = wave_motion();
    let motion = serialize_bvh(&skeleton, &clip)?;
    Ok(Biped {
        proj,
        mask,
        drawing,
        contour,
        keypoints,
        coarse,
        motion,
    })
}

/// Polygonized union of the solid capsules.
pub fn solid_mesh(parts: &[Capsule], resolution: usize) -> Result<TriMesh> {
    let pts: Vec<Point> = parts
        .iter()
        .flat_map(|c| {
            let r = c.solid;
            [
                Point::new(c.a[0].min(c.b[0]) - r, c.a[1].min(c.b[1]) - r, -r),
                Point::new(c.a[0].max(c.b[0]) + r, c.a[1].max(c.b[1]) + r, r),
            ]
        })
        .collect();
    let b = Aabb::from_points(&pts).expect("parts");
    let e = b.extent();
    let spacing = e.x.max(e.y).max(e.z) / (resolution.max(8) - 5) as f64;
    let origin = b.min - Vec3::repeat(2.0 * spacing);
    let dims = [0, 1, 2].map(|k| (e[k] / spacing).ceil() as usize + 5);
    let grid = SdfGrid::from_fn(dims, origin, spacing, |p| {
        parts
            .iter()
            .map(|c| c.axis_distance(p.x, p.y, p.z) - c.solid)
            .fold(f64::INFINITY, f64::min)
    })?;
    Ok(marching_cubes(&grid, 0.0).mesh.compact().0)
}

/// Source skeleton for the wave clip, in centimetres, with the joint names
/// the keypoint embedding produces.
pub fn wave_skeleton() -> Skeleton {
    let cm = |p: [f64; 2]| Vec3::new(p[0] * 100.0, p[1] * 100.0, 0.0);
    let spine = [0.0, GROIN[1] + 0.5 * (CHIN[1] - GROIN[1])];
    let chest = [0.0, GROIN[1] + 0.85 * (CHIN[1] - GROIN[1])];
    let head_top = [0.0, HEAD[1] + 0.13];
    let layout: [(&str, Option<usize>, [f64; 2]); 17] = [
        ("groin", None, GROIN),
        ("spine", Some(0), spine),
        ("chest", Some(1), chest),
        ("chin", Some(2), CHIN),
        ("head_top", Some(3), head_top),
        ("left_shoulder", Some(2), SHOULDER),
        ("left_elbow", Some(5), ELBOW),
        ("left_wrist", Some(6), WRIST),
        ("right_shoulder", Some(2), mirror(SHOULDER)),
        ("right_elbow", Some(8), mirror(ELBOW)),
        ("right_wrist", Some(9), mirror(WRIST)),
        ("left_hip", Some(0), HIP),
        ("left_knee", Some(11), KNEE),
        ("left_ankle", Some(12), ANKLE),
        ("right_hip", Some(0), mirror(HIP)),
        ("right_knee", Some(14), mirror(KNEE)),
        ("right_ankle", Some(15), mirror(ANKLE)),
    ];
    let joints = layout
        .iter()
        .map(|&(name, parent, p)| Joint {
            name: name.into(),
            parent,
            rotation: UnitQuaternion::identity(),
            translation: match parent {
                Some(q) => cm(p) - cm(layout[q].2),
                None => cm(p),
            },
        })
        .collect();
    Skeleton::new(joints).expect("valid layout")
}

/// Thirty frames: right arm raised and waving from the elbow, a slight
/// chest twist and a small bob of the hips.
pub fn wave_motion() -> (Skeleton, MotionClip) {
    let s = wave_skeleton();
    let idx = |n: &str| s.index_of(n).expect("joint");
    let z = |deg: f64| UnitQuaternion::from_axis_angle(&Vector3::z_axis(), deg.to_radians());
    let y = |deg: f64| UnitQuaternion::from_axis_angle(&Vector3::y_axis(), deg.to_radians());
    let frames = (0..WAVE_FRAMES)
        .map(|f| {
            let phase = 2.0 * PI * f as f64 / WAVE_FRAMES as f64;
            let mut pose: Pose = s.rest_pose();
            pose.rotations[idx("right_shoulder")] = z(-70.0);
            pose.rotations[idx("right_elbow")] = z(-40.0 + 30.0 * (2.0 * phase).sin());
            pose.rotations[idx("chest")] = y(5.0 * phase.sin());
            pose.root_translation.y += 2.0 * phase.sin();
            pose
        })
        .collect();
    (
        s,
        MotionClip {
            frame_time: 1.0 / 30.0,
            frames,
        },
    )
}

/// Hand-written two-joint clip with three frames.
pub const TWO_JOINT_BVH: &str = "HIERARCHY
ROOT hips
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT spine
  {
    OFFSET 0 1.5 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0 1 0
    }
  }
}
MOTION
Frames: 3
Frame Time: 0.04
0 1 0 0 0 0 0 0 0
0.5 1 0 90 0 0 0 0 0
1 1 0 0 0 0 0 45 0
";

/// Default joint-name map for the biped: every joint to itself.
pub fn identity_name_map(skeleton: &Skeleton) -> String {
    let mut s = String::from("{");
    for (i, j) in skeleton.joints().iter().enumerate() {
        let sep = if i == 0 { "" } else { "," };
        let _ = write!(s, "{sep}\n  \"{0}\": \"{0}\"", j.name);
    }
    s.push_str("\n}\n");
    s
}
