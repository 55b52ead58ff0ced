use std::path::Path;

use anyhow::{Context, Result};
use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};
use sketchrig_core::rig::{Joint, Skeleton, SkinWeights};
use sketchrig_core::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct JointDoc {
    name: String,
    parent: Option<usize>,
    translation: [f64; 3],
    /// `[w, x, y, z]`.
    rotation: [f64; 4],
}

/// Skeleton and skin weights as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigFile {
    joints: Vec<JointDoc>,
    pub weights: SkinWeights,
}

impl RigFile {
    pub fn new(skeleton: &Skeleton, weights: SkinWeights) -> Self {
        let joints = skeleton
            .joints()
            .iter()
            .map(|j| {
                let q = j.rotation.quaternion();
                JointDoc {
                    name: j.name.clone(),
                    parent: j.parent,
                    translation: [j.translation.x, j.translation.y, j.translation.z],
                    rotation: [q.w, q.i, q.j, q.k],
                }
            })
            .collect();
        Self { joints, weights }
    }

    pub fn skeleton(&self) -> Result<Skeleton> {
        let joints = self
            .joints
            .iter()
            .map(|j| {
                let [w, x, y, z] = j.rotation;
                Joint {
                    name: j.name.clone(),
                    parent: j.parent,
                    rotation: UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
                    translation: Vec3::from(j.translation),
                }
            })
            .collect();
        Ok(Skeleton::new(joints)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}
