use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sketchrig_core::deform::HandleParams;
use sketchrig_core::raster::CannyParams;
use sketchrig_core::render::View;
use sketchrig_core::volume::FrontProjection;

/// Input files. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub drawing: PathBuf,
    pub mask: PathBuf,
    #[serde(default)]
    pub contour: Option<PathBuf>,
    /// Back-view image; defaults to the mirrored front drawing.
    #[serde(default)]
    pub back: Option<PathBuf>,
    /// Input mesh (OBJ/PLY). Exactly one of `mesh` and `sdf` is required.
    #[serde(default)]
    pub mesh: Option<PathBuf>,
    #[serde(default)]
    pub sdf: Option<PathBuf>,
    pub keypoints: PathBuf,
    pub motion: PathBuf,
    /// `{target joint: source joint}`; defaults to matching names.
    #[serde(default)]
    pub name_map: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InpaintConfig {
    pub radius: f64,
    /// Outline band width used when no contour mask is given.
    pub band: f64,
    /// Luminance at or below which band pixels count as outline.
    pub darkness: f32,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        Self {
            radius: sketchrig_core::inpaint::DEFAULT_RADIUS,
            band: 3.0,
            darkness: 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeConfig {
    /// Samples per axis.
    pub grid: usize,
    pub padding: usize,
}

impl Default for VolumeConfig {
    fn default() -> Self {
        Self { grid: 128, padding: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothConfig {
    pub iterations: usize,
    pub strength: f64,
    /// Only vertices farther than this many pixels inside the silhouette move.
    pub guard: f64,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            strength: 0.5,
            guard: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkinConfig {
    pub power: f64,
    pub max_bones: usize,
}

impl Default for SkinConfig {
    fn default() -> Self {
        Self {
            power: sketchrig_core::rig::SKIN_POWER,
            max_bones: sketchrig_core::rig::SKIN_MAX_BONES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub resolution: usize,
    pub view: View,
    pub canny: CannyParams,
    /// First and one-past-last frame; all frames when absent.
    pub frames: Option<[usize; 2]>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            resolution: 512,
            view: View::Front,
            canny: CannyParams::default(),
            frames: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub inputs: Inputs,
    pub output_dir: PathBuf,
    /// Model units from the drawing's center to its left/right edge.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default)]
    pub inpaint: InpaintConfig,
    #[serde(default)]
    pub volume: VolumeConfig,
    #[serde(default)]
    pub thinning: HandleParams,
    #[serde(default)]
    pub smoothing: SmoothConfig,
    #[serde(default)]
    pub skinning: SkinConfig,
    #[serde(default)]
    pub render: RenderConfig,
}

fn default_half_width() -> f64 {
    1.0
}

impl Config {
    /// Reads a config and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Config =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.resolve(&base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let i = &mut self.inputs;
        for p in [&mut i.drawing, &mut i.mask, &mut i.keypoints, &mut i.motion] {
            fix(p);
        }
        for p in [&mut i.contour, &mut i.back, &mut i.mesh, &mut i.sdf, &mut i.name_map]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn projection(&self, width: usize, height: usize) -> FrontProjection {
        FrontProjection::centered(width, height, self.half_width)
    }
}
