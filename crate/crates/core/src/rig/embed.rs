//! Humanoid skeleton from eight front-view keypoints.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use super::{Joint, Skeleton};
use crate::deform::mid_depth;
use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::render::{cover, Camera};
use crate::volume::{FrontProjection, TriangleTree};

pub const KEYPOINT_NAMES: [&str; 8] = [
    "chin",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_knee",
    "right_knee",
    "groin",
];

/// Shoulders sit this far up the groin-to-chin segment.
const SHOULDER_HEIGHT: f64 = 0.85;
const SPINE_HEIGHT: f64 = 0.5;
/// Shoulder offset toward the elbow, as a fraction of the horizontal
/// chest-to-elbow distance, capped by a fraction of the spine length.
const SHOULDER_REACH: f64 = 0.5;
const SHOULDER_CAP: f64 = 0.25;
/// Hips sit at groin height, this fraction of the way toward each knee.
const HIP_REACH: f64 = 0.5;

/// Named pixel positions in an image of `image_size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointSet {
    pub image_size: [usize; 2],
    pub keypoints: BTreeMap<String, [f64; 2]>,
}

impl KeypointSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let kp: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        kp.validate()?;
        Ok(kp)
    }

    pub fn validate(&self) -> Result<()> {
        let [w, h] = self.image_size;
        if w == 0 || h == 0 {
            return Err(Error::Keypoints(format!("image size {w}x{h}")));
        }
        for name in KEYPOINT_NAMES {
            let [x, y] = self
                .keypoints
                .get(name)
                .ok_or_else(|| Error::Keypoints(format!("missing `{name}`")))?;
            if !(*x >= 0.0 && *y >= 0.0 && *x <= (w - 1) as f64 && *y <= (h - 1) as f64) {
                return Err(Error::Keypoints(format!("`{name}` at ({x}, {y}) is outside {w}x{h}")));
            }
        }
        if let Some(extra) = self.keypoints.keys().find(|k| !KEYPOINT_NAMES.contains(&k.as_str())) {
            return Err(Error::Keypoints(format!("unknown keypoint `{extra}`")));
        }
        Ok(())
    }

    /// Position rescaled to a `width` x `height` raster.
    fn at(&self, name: &str, width: usize, height: usize) -> [f64; 2] {
        let [x, y] = self.keypoints[name];
        [
            x * width as f64 / self.image_size[0] as f64,
            y * height as f64 / self.image_size[1] as f64,
        ]
    }
}

/// Builds the fixed humanoid topology rooted at the groin. Joint depths are
/// the mid-depth of the view ray through each joint's pixel; synthesized
/// joints whose ray misses take their parent's depth.
///
/// Joints: groin, spine, chest, chin, head_top, {left,right}_shoulder,
/// _elbow, _wrist, {left,right}_hip, _knee, _ankle. Shoulders hang off the
/// chest, hips off the groin, ankles and head_top extend to the bottom and
/// top of the front silhouette in the knee and chin columns.
pub fn embed_skeleton(mesh: &TriMesh, kp: &KeypointSet, proj: &FrontProjection) -> Result<Skeleton> {
    kp.validate()?;
    proj.validate()?;
    let tree = TriangleTree::new(mesh).ok_or(Error::EmptyMesh)?;
    let coverage = cover(mesh, &Camera::front(*proj));
    let (w, h) = (proj.width, proj.height);
    let column = |x: f64| -> Vec<usize> {
        let cx = (x.round().max(0.0) as usize).min(w - 1);
        (0..h).filter(|&y| coverage.covered(cx, y)).collect()
    };
    let k = |n: &str| kp.at(n, w, h);
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t];

    let groin = k("groin");
    let chin = k("chin");
    let spine_len = ((chin[0] - groin[0]).powi(2) + (chin[1] - groin[1]).powi(2)).sqrt();
    let chest = lerp(groin, chin, SHOULDER_HEIGHT);
    let head_top = match column(chin[0]).into_iter().find(|&y| (y as f64) <= chin[1]) {
        Some(y) => [chin[0], y as f64],
        None => [chin[0], chin[1] - SHOULDER_CAP * spine_len],
    };
    let shoulder = |elbow: [f64; 2]| {
        let dx = elbow[0] - chest[0];
        let reach = (SHOULDER_REACH * dx.abs()).min(SHOULDER_CAP * spine_len);
        [chest[0] + reach * dx.signum(), chest[1]]
    };
    let hip = |knee: [f64; 2]| [groin[0] + HIP_REACH * (knee[0] - groin[0]), groin[1]];
    let ankle = |knee: [f64; 2]| match column(knee[0]).into_iter().rev().find(|&y| (y as f64) >= knee[1]) {
        Some(y) => [knee[0], y as f64],
        None => knee,
    };

    // (name, parent, pixel, is a keypoint)
    let layout: Vec<(&str, Option<usize>, [f64; 2], bool)> = vec![
        ("groin", None, groin, true),
        ("spine", Some(0), lerp(groin, chin, SPINE_HEIGHT), false),
        ("chest", Some(1), chest, false),
        ("chin", Some(2), chin, true),
        ("head_top", Some(3), head_top, false),
        ("left_shoulder", Some(2), shoulder(k("left_elbow")), false),
        ("left_elbow", Some(5), k("left_elbow"), true),
        ("left_wrist", Some(6), k("left_wrist"), true),
        ("right_shoulder", Some(2), shoulder(k("right_elbow")), false),
        ("right_elbow", Some(8), k("right_elbow"), true),
        ("right_wrist", Some(9), k("right_wrist"), true),
        ("left_hip", Some(0), hip(k("left_knee")), false),
        ("left_knee", Some(11), k("left_knee"), true),
        ("left_ankle", Some(12), ankle(k("left_knee")), false),
        ("right_hip", Some(0), hip(k("right_knee")), false),
        ("right_knee", Some(14), k("right_knee"), true),
        ("right_ankle", Some(15), ankle(k("right_knee")), false),
    ];

    let mut positions: Vec<Point> = Vec::with_capacity(layout.len());
    for &(name, parent, px, keypoint) in &layout {
        let (x, y) = proj.to_model(px[0], px[1]);
        let z = match mid_depth(&tree, mesh, proj, px[0], px[1]) {
            Some((z, _)) => z,
            None if keypoint => return Err(Error::KeypointMiss(name.to_string())),
            None => positions[parent.expect("root is a keypoint")].z,
        };
        positions.push(Point::new(x, y, z));
    }
    let joints = layout
        .iter()
        .enumerate()
        .map(|(i, &(name, parent, _, _))| Joint {
            name: name.to_string(),
            parent,
            rotation: UnitQuaternion::identity(),
            translation: match parent {
                Some(p) => positions[i] - positions[p],
                None => positions[i].coords,
            },
        })
        .collect();
    Skeleton::new(joints)
}
