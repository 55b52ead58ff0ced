//! Skeletons, skinning and motion.

pub mod bvh;
mod embed;

use std::collections::BTreeMap;

use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bvh::{parse_bvh, serialize_bvh, BvhError};
pub use embed::{embed_skeleton, KeypointSet, KEYPOINT_NAMES};

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh, Vec3};
use crate::volume::point_segment_distance;

/// Default inverse-distance exponent for skin weights.
pub const SKIN_POWER: f64 = 4.0;
/// Default number of influencing bones per vertex.
pub const SKIN_MAX_BONES: usize = 2;
const SKIN_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub rotation: UnitQuaternion<f64>,
    /// Offset from the parent joint in the parent's frame (model position
    /// for the root).
    pub translation: Vec3,
}

/// Joint tree stored parent-before-child with a single root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joints: Vec<Joint>,
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::Rig("skeleton has no joints".into()));
        }
        for (i, j) in joints.iter().enumerate() {
            match (i, j.parent) {
                (0, None) => {}
                (0, Some(_)) => return Err(Error::Rig("joint 0 must be the root".into())),
                (_, None) => return Err(Error::Rig(format!("second root `{}`", j.name))),
                (_, Some(p)) if p >= i => {
                    return Err(Error::Rig(format!("joint `{}` precedes its parent", j.name)))
                }
                _ => {}
            }
            if joints[..i].iter().any(|k| k.name == j.name) {
                return Err(Error::Rig(format!("duplicate joint name `{}`", j.name)));
            }
        }
        Ok(Self { joints })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (i + 1..self.joints.len()).filter(move |&c| self.joints[c].parent == Some(i))
    }

    /// Pose that reproduces the rest transforms.
    pub fn rest_pose(&self) -> Pose {
        Pose {
            rotations: self.joints.iter().map(|j| j.rotation).collect(),
            root_translation: self.joints[0].translation,
        }
    }

    pub fn rest_globals(&self) -> Vec<Isometry3<f64>> {
        self.globals(&self.rest_pose()).expect("rest pose matches skeleton")
    }

    /// World transform of every joint under `pose`.
    pub fn globals(&self, pose: &Pose) -> Result<Vec<Isometry3<f64>>> {
        if pose.rotations.len() != self.joints.len() {
            return Err(Error::Rig(format!(
                "pose has {} rotations for {} joints",
                pose.rotations.len(),
                self.joints.len()
            )));
        }
        let mut g: Vec<Isometry3<f64>> = Vec::with_capacity(self.joints.len());
        for (i, j) in self.joints.iter().enumerate() {
            let t = if i == 0 { pose.root_translation } else { j.translation };
            let local = Isometry3::from_parts(Translation3::from(t), pose.rotations[i]);
            g.push(match j.parent {
                Some(p) => g[p] * local,
                None => local,
            });
        }
        Ok(g)
    }

    /// Rest-pose joint positions.
    pub fn rest_positions(&self) -> Vec<Point> {
        self.rest_globals().iter().map(|g| Point::from(g.translation.vector)).collect()
    }

    /// Height of the root above the lowest joint in the rest pose.
    pub fn root_height(&self) -> f64 {
        let p = self.rest_positions();
        let lowest = p.iter().map(|q| q.y).fold(f64::INFINITY, f64::min);
        p[0].y - lowest
    }

    /// Segments from each joint to its children, indexed by the joint that
    /// drives them. Leaf joints drive no segment.
    pub fn bones(&self) -> Vec<(usize, Vec<(Point, Point)>)> {
        let p = self.rest_positions();
        (0..self.joints.len())
            .filter_map(|i| {
                let segs: Vec<(Point, Point)> = self.children(i).map(|c| (p[i], p[c])).collect();
                (!segs.is_empty()).then_some((i, segs))
            })
            .collect()
    }
}

/// Local joint rotations plus the root translation.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rotations: Vec<UnitQuaternion<f64>>,
    pub root_translation: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    /// Seconds per frame.
    pub frame_time: f64,
    pub frames: Vec<Pose>,
}

impl MotionClip {
    pub fn frame_rate(&self) -> f64 {
        1.0 / self.frame_time
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Per-vertex `(joint, weight)` lists.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SkinWeights {
    pub influences: Vec<Vec<(usize, f64)>>,
}

impl SkinWeights {
    pub fn validate(&self, vertices: usize, joints: usize) -> Result<()> {
        if self.influences.len() != vertices {
            return Err(Error::Rig(format!(
                "{} weight lists for {vertices} vertices",
                self.influences.len()
            )));
        }
        for (v, inf) in self.influences.iter().enumerate() {
            if let Some((b, _)) = inf.iter().find(|(b, _)| *b >= joints) {
                return Err(Error::Rig(format!("vertex {v} references bone {b} of {joints}")));
            }
            if inf.iter().any(|(_, w)| !(*w >= 0.0)) {
                return Err(Error::Rig(format!("vertex {v} has a negative weight")));
            }
        }
        Ok(())
    }
}

/// Inverse-distance weights `1/(d + 1e-6)^power` over the `max_bones`
/// nearest bones (distance to the bone's rest segments), normalized.
pub fn compute_skin_weights(mesh: &TriMesh, skeleton: &Skeleton, power: f64, max_bones: usize) -> Result<SkinWeights> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::InvalidParameter(format!("skinning power {power}")));
    }
    if max_bones == 0 {
        return Err(Error::InvalidParameter("max_bones must be at least 1".into()));
    }
    let mut bones = skeleton.bones();
    if bones.is_empty() {
        // a lone joint drives everything
        bones.push((0, vec![(skeleton.rest_positions()[0], skeleton.rest_positions()[0])]));
    }
    let influences = mesh
        .vertices()
        .par_iter()
        .map(|v| {
            let mut d: Vec<(f64, usize)> = bones
                .iter()
                .map(|(j, segs)| {
                    let dist = segs
                        .iter()
                        .map(|(a, b)| point_segment_distance(v, a, b))
                        .fold(f64::INFINITY, f64::min);
                    (dist, *j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(max_bones);
            let raw: Vec<f64> = d.iter().map(|(dist, _)| (dist + SKIN_EPS).powf(-power)).collect();
            let sum: f64 = raw.iter().sum();
            d.iter().zip(&raw).map(|((_, j), w)| (*j, w / sum)).collect()
        })
        .collect();
    Ok(SkinWeights { influences })
}

/// Linear blend skinning: `v' = sum_i w_i G_i B_i^-1 v`.
pub fn apply_pose_lbs(mesh: &TriMesh, skeleton: &Skeleton, weights: &SkinWeights, pose: &Pose) -> Result<TriMesh> {
    weights.validate(mesh.vertex_count(), skeleton.len())?;
    let rest = skeleton.rest_globals();
    let posed = skeleton.globals(pose)?;
    let skin: Vec<Isometry3<f64>> = posed.iter().zip(&rest).map(|(g, b)| g * b.inverse()).collect();
    let out = mesh
        .vertices()
        .par_iter()
        .zip(&weights.influences)
        .map(|(v, inf)| {
            let total: f64 = inf.iter().map(|(_, w)| w).sum();
            if inf.is_empty() || total == 0.0 {
                return *v;
            }
            let acc = inf
                .iter()
                .map(|&(b, w)| (skin[b] * v).coords * w)
                .sum::<Vec3>();
            Point::from(acc / total)
        })
        .collect();
    mesh.with_positions(out)
}

/// Maps `motion` (on `source`) onto `target`. `name_map` is
/// `target joint -> source joint`; unmapped target joints keep their rest
/// rotation. The root's displacement from its rest position is scaled by
/// the ratio of root heights.
pub fn retarget(
    motion: &MotionClip,
    source: &Skeleton,
    target: &Skeleton,
    name_map: &BTreeMap<String, String>,
) -> Result<MotionClip> {
    let mut pairs = Vec::with_capacity(name_map.len());
    for (t, s) in name_map {
        let ti = target
            .index_of(t)
            .ok_or_else(|| Error::Rig(format!("name map references unknown target joint `{t}`")))?;
        let si = source
            .index_of(s)
            .ok_or_else(|| Error::Rig(format!("name map references unknown source joint `{s}`")))?;
        pairs.push((ti, si));
    }
    let hs = source.root_height();
    let ht = target.root_height();
    let ratio = if hs > 0.0 && ht > 0.0 { ht / hs } else { 1.0 };
    let src_rest = source.joints()[0].translation;
    let tgt_rest = target.joints()[0].translation;
    let frames = motion
        .frames
        .iter()
        .map(|f| {
            if f.rotations.len() != source.len() {
                return Err(Error::Rig("motion frame does not match the source skeleton".into()));
            }
            let mut pose = target.rest_pose();
            for &(ti, si) in &pairs {
                pose.rotations[ti] = f.rotations[si];
            }
            pose.root_translation = tgt_rest + (f.root_translation - src_rest) * ratio;
            Ok(pose)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MotionClip {
        frame_time: motion.frame_time,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::icosphere;
    use nalgebra::Vector3;

    pub(crate) fn chain() -> Skeleton {
        let j = |name: &str, parent, t: Vec3| Joint {
            name: name.into(),
            parent,
            rotation: UnitQuaternion::identity(),
            translation: t,
        };
        Skeleton::new(vec![
            j("root", None, Vec3::zeros()),
            j("a", Some(0), Vec3::new(0.0, 1.0, 0.0)),
            j("b", Some(1), Vec3::new(0.0, 1.0, 0.0)),
            j("c", Some(0), Vec3::new(0.0, -1.0, 0.0)),
        ])
        .unwrap()
    }

    #[test]
    fn topology_is_validated() {
        let mut s = chain().joints().to_vec();
        s[2].parent = Some(3);
        assert!(Skeleton::new(s.clone()).is_err());
        s[2].parent = None;
        assert!(Skeleton::new(s).is_err());
    }

    #[test]
    fn rest_pose_is_identity_and_root_rotation_is_rigid() {
        let s = chain();
        let m = icosphere(1.5, 2);
        let w = compute_skin_weights(&m, &s, SKIN_POWER, SKIN_MAX_BONES).unwrap();
        for inf in &w.influences {
            let sum: f64 = inf.iter().map(|x| x.1).sum();
            assert!((sum - 1.0).abs() < 1e-12 && inf.iter().all(|x| x.1 >= 0.0));
        }
        let rest = apply_pose_lbs(&m, &s, &w, &s.rest_pose()).unwrap();
        for (a, b) in rest.vertices().iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-12);
        }
        let r = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.7);
        let mut pose = s.rest_pose();
        pose.rotations[0] = r;
        let rotated = apply_pose_lbs(&m, &s, &w, &pose).unwrap();
        for (a, b) in rotated.vertices().iter().zip(m.vertices()) {
            assert!((a - r * b).norm() < 1e-12);
        }
    }

    #[test]
    fn weight_extremes() {
        let s = chain();
        let on = TriMesh::new(
            vec![Point::new(0.0, 1.5, 0.0), Point::new(0.5, 0.0, 0.0), Point::new(3.0, 3.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let w = compute_skin_weights(&on, &s, SKIN_POWER, 2).unwrap();
        // on bone a (a -> b); the root's segments are 0.5 away
        let top = w.influences[0].iter().find(|x| x.0 == 1).unwrap().1;
        assert!(top >= 0.999);
        // (0.5, 0, 0) is 0.5 from the root's two segments and from nothing else
        assert_eq!(w.influences[1].len(), 2);
        assert!(w.influences[1].iter().any(|x| x.0 == 0));
        let single = compute_skin_weights(&on, &s, SKIN_POWER, 1).unwrap();
        assert!(single.influences.iter().all(|i| i.len() == 1 && i[0].1 == 1.0));
    }

    #[test]
    fn equidistant_bones_split_evenly() {
        let j = |name: &str, parent, t: Vec3| Joint {
            name: name.into(),
            parent,
            rotation: UnitQuaternion::identity(),
            translation: t,
        };
        let s = Skeleton::new(vec![
            j("root", None, Vec3::zeros()),
            j("l", Some(0), Vec3::new(-1.0, 0.0, 0.0)),
            j("l2", Some(1), Vec3::new(0.0, 1.0, 0.0)),
            j("r", Some(0), Vec3::new(1.0, 0.0, 0.0)),
            j("r2", Some(3), Vec3::new(0.0, 1.0, 0.0)),
        ])
        .unwrap();
        let far = TriMesh::new(
            vec![Point::new(0.0, 3.0, 0.0), Point::new(-0.1, 9.0, 0.0), Point::new(0.1, 9.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        // sqrt(5) from both side bones, 3 from the root's segments
        let w = compute_skin_weights(&far, &s, SKIN_POWER, 2).unwrap();
        let mut inf = w.influences[0].clone();
        inf.sort_by_key(|x| x.0);
        assert_eq!((inf[0].0, inf[1].0), (1, 3));
        assert!((inf[0].1 - 0.5).abs() < 1e-6 && (inf[1].1 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn translated_single_bone_shifts_everything() {
        let s = chain();
        let m = icosphere(0.3, 1);
        let w = SkinWeights {
            influences: vec![vec![(0, 1.0)]; m.vertex_count()],
        };
        let mut pose = s.rest_pose();
        let t = Vec3::new(0.2, -0.1, 0.4);
        pose.root_translation += t;
        let out = apply_pose_lbs(&m, &s, &w, &pose).unwrap();
        for (a, b) in out.vertices().iter().zip(m.vertices()) {
            assert!((a - (b + t)).norm() < 1e-12);
        }
        let bad = SkinWeights {
            influences: vec![vec![(9, 1.0)]; m.vertex_count()],
        };
        assert!(apply_pose_lbs(&m, &s, &bad, &pose).is_err());
    }

    #[test]
    fn retarget_rules() {
        let s = chain();
        let mut f = s.rest_pose();
        f.rotations[1] = UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3);
        f.root_translation = Vec3::new(1.0, 2.0, 3.0);
        let clip = MotionClip {
            frame_time: 1.0 / 30.0,
            frames: vec![f.clone(), s.rest_pose()],
        };
        let ident: BTreeMap<String, String> = s.joints().iter().map(|j| (j.name.clone(), j.name.clone())).collect();
        assert_eq!(retarget(&clip, &s, &s, &ident).unwrap(), clip);
        let empty = retarget(&clip, &s, &s, &BTreeMap::new()).unwrap();
        assert!(empty.frames.iter().all(|p| p.rotations == s.rest_pose().rotations));
        assert_eq!(empty.frames.len(), 2);

        // halve every offset: target root height is half the source's
        let small = Skeleton::new(
            s.joints()
                .iter()
                .map(|j| Joint {
                    translation: j.translation * 0.5,
                    ..j.clone()
                })
                .collect(),
        )
        .unwrap();
        let r = retarget(&clip, &s, &small, &ident).unwrap();
        assert_eq!(r.frames[0].root_translation, Vec3::new(0.5, 1.0, 1.5));
        let mut bad = ident.clone();
        bad.insert("nope".into(), "root".into());
        assert!(retarget(&clip, &s, &small, &bad).is_err());
    }
}
